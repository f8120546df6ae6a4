//! One session's orchestration: operator, kernel, routed backend,
//! reasoning, occupancy grid and memory behind a single turn function.
//!
//! A turn runs validate, memory context selection, dispatch, envelope
//! construction and memory write, in that order. Failed turns leave every
//! piece of session state untouched and come back as error envelopes that
//! carry the current (unadvanced) turn number.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::envelope::{Artifact, ResultEnvelope, SessionId, Task};
use crate::frame::{encode_frame, ObservationFrame};
use crate::hash::Fnv64;
use crate::kernel::{GridMap, KernelAction, KernelConfig, MapError, WorldKernel, WorldState, DEMO_MAP};
use crate::memory::{featurize, ContextQuery, MemoryConfig, MemoryError, MemoryStore};
use crate::modality::Modality;
use crate::operator::{InteractionSignal, InteractionTemplate, Operator, OperatorError};
use crate::pose::{AngleKind, CameraAngles};
use crate::reasoning::{infer_audio, infer_spatial, Reasoner, ReasoningAnswer, ReasoningKind, SessionContext};
use crate::representation::{format_wkpc, OccupancyGrid};
use crate::synthesis::audio::Waveform;
use crate::synthesis::{
    load_backend, BackendDescriptor, BackendKind, BoxedBackend, SynthesisControls, SynthesisError,
    SynthesisRequest,
};

/// Memory records consulted per turn.
pub const CONTEXT_K: usize = 4;
pub const REASONER_ID: &str = "templated-reasoner";
pub const REPRESENTATION_ID: &str = "occupancy-fusion";

fn demo_map_text() -> String {
    DEMO_MAP.into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub task: Task,
    /// Map text; defaults to the built-in 5×5 demo map.
    #[serde(default = "demo_map_text")]
    pub map: String,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub memory: MemoryConfig,
    /// Overrides for the default local backend of each kind.
    #[serde(default)]
    pub backends: Vec<BackendDescriptor>,
    #[serde(default)]
    pub template: InteractionTemplate,
    /// Base controls; per-turn overrides apply on top.
    #[serde(default)]
    pub controls: Option<SynthesisControls>,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(task: Task, seed: u64) -> Self {
        Self {
            task,
            map: demo_map_text(),
            kernel: KernelConfig::default(),
            memory: MemoryConfig::default(),
            backends: Vec::new(),
            template: InteractionTemplate::default(),
            controls: None,
            seed,
        }
    }

    pub fn with_kernel(mut self, kernel: KernelConfig) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_map(mut self, map: impl Into<String>) -> Self {
        self.map = map.into();
        self
    }

    pub fn descriptor(&self, kind: BackendKind) -> BackendDescriptor {
        self.backends
            .iter()
            .rev()
            .find(|d| d.kind == kind)
            .cloned()
            .unwrap_or_else(|| BackendDescriptor::local(kind))
    }
}

/// Backend kind a task is routed to, if it uses a synthesis backend.
pub fn route(task: Task) -> Option<BackendKind> {
    match task {
        Task::Navigate => Some(BackendKind::Visual),
        Task::Act => Some(BackendKind::Action),
        Task::Sonify => Some(BackendKind::Audio),
        Task::Reason | Task::Reconstruct => None,
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BuildError {
    #[error("invalid map: {0}")]
    Map(#[from] MapError),
    #[error("invalid kernel config: {0}")]
    Kernel(#[from] crate::kernel::KernelError),
    #[error("invalid memory config: {0}")]
    Memory(#[from] MemoryError),
    #[error("invalid template: {0}")]
    Template(#[from] OperatorError),
    #[error("backend: {0}")]
    Backend(#[from] SynthesisError),
}

/// Raw input for one turn.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TurnInput {
    pub signals: Vec<InteractionSignal>,
    pub query: Option<String>,
    pub kind: Option<ReasoningKind>,
    /// Named synthesis control overrides.
    pub controls: BTreeMap<String, f64>,
    pub observation: Option<ObservationFrame>,
    pub audio: Option<Waveform>,
}

impl TurnInput {
    pub fn actions<S: AsRef<str>>(tokens: &[S]) -> Self {
        Self {
            signals: tokens.iter().map(|t| InteractionSignal::token(t.as_ref())).collect(),
            ..Self::default()
        }
    }

    pub fn query(kind: ReasoningKind, text: &str) -> Self {
        Self {
            query: Some(text.into()),
            kind: Some(kind),
            ..Self::default()
        }
    }

    pub fn text(text: &str) -> Self {
        Self {
            query: Some(text.into()),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TurnErrorKind {
    /// The session was closed.
    Closed,
    /// The episode already ended.
    Terminal,
    /// The operator or the control overrides rejected the input.
    Rejected,
    /// The routed module failed.
    Backend,
}

impl TurnErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Closed => "closed",
            Self::Terminal => "terminal",
            Self::Rejected => "rejected",
            Self::Backend => "backend",
        }
    }
}

/// A failed turn together with its in-band error envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnError {
    pub kind: TurnErrorKind,
    pub message: String,
    pub envelope: ResultEnvelope,
}

impl core::fmt::Display for TurnError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.message)
    }
}

impl core::error::Error for TurnError {}

struct Outcome {
    artifacts: Vec<Artifact>,
    metadata: BTreeMap<String, String>,
    next_state: Option<WorldState>,
    reward: Option<f64>,
    grid: Option<OccupancyGrid>,
}

impl Outcome {
    fn new(metadata: BTreeMap<String, String>) -> Self {
        Self {
            artifacts: Vec::new(),
            metadata,
            next_state: None,
            reward: None,
            grid: None,
        }
    }
}

pub struct Pipeline {
    config: PipelineConfig,
    session: SessionId,
    operator: Operator,
    kernel: WorldKernel,
    backend: Option<BoxedBackend>,
    reasoner: Reasoner,
    memory: MemoryStore,
    grid: OccupancyGrid,
    state: WorldState,
    camera: CameraAngles,
    turn: u64,
    cumulative_reward: f64,
    last_reward: Option<f64>,
    open: bool,
}

impl core::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Pipeline")
            .field("session", &self.session)
            .field("task", &self.config.task)
            .field("turn", &self.turn)
            .field("state", &self.state)
            .field("open", &self.open)
            .finish_non_exhaustive()
    }
}

fn per_turn_seed(seed: u64, turn: u64) -> u64 {
    Fnv64::new()
        .update(&seed.to_be_bytes())
        .update(&turn.to_be_bytes())
        .finish()
}

fn fmt_reward(r: f64) -> String {
    format!("{r:.6}")
}

fn fmt_pose(s: &WorldState) -> String {
    format!("{},{},{}", s.pose.x, s.pose.y, s.pose.heading)
}

impl Pipeline {
    /// Builds a pipeline whose session id is derived from the seed.
    pub fn build(config: PipelineConfig) -> Result<Self, BuildError> {
        let id = SessionId::derive(config.seed, 0);
        Self::build_with_id(config, id)
    }

    pub fn build_with_id(config: PipelineConfig, session: SessionId) -> Result<Self, BuildError> {
        let map = GridMap::parse(&config.map)?;
        let kernel = WorldKernel::new(map, config.kernel)?;
        let operator = Operator::new(config.template.clone())?;
        let mut memory = MemoryStore::new(config.memory)?;
        memory.open_session(session.clone())?;
        if let Some(c) = &config.controls {
            c.validate()?;
        }
        let backend = route(config.task)
            .map(|kind| load_backend(&config.descriptor(kind)))
            .transpose()?;
        let grid = OccupancyGrid::new(kernel.map().width(), kernel.map().height());
        let state = kernel.initial_state();
        Ok(Self {
            config,
            session,
            operator,
            kernel,
            backend,
            reasoner: Reasoner::default(),
            memory,
            grid,
            state,
            camera: CameraAngles {
                polar: 90.0,
                azimuth: 0.0,
                yaw: 0.0,
            },
            turn: 0,
            cumulative_reward: 0.0,
            last_reward: None,
            open: true,
        })
    }

    pub fn session_id(&self) -> &SessionId {
        &self.session
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn task(&self) -> Task {
        self.config.task
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn camera(&self) -> CameraAngles {
        self.camera
    }

    pub fn kernel(&self) -> &WorldKernel {
        &self.kernel
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn memory(&self) -> &MemoryStore {
        &self.memory
    }

    /// Direct memory access for explicit compress/pin/manage calls.
    pub fn memory_mut(&mut self) -> &mut MemoryStore {
        &mut self.memory
    }

    pub fn turn(&self) -> u64 {
        self.turn
    }

    pub fn cumulative_reward(&self) -> f64 {
        self.cumulative_reward
    }

    pub fn is_open(&self) -> bool {
        self.open
    }

    pub fn is_terminal(&self) -> bool {
        self.state.terminal
    }

    pub fn backend_id(&self) -> Option<&str> {
        self.backend.as_ref().map(|b| b.id())
    }

    pub fn close(&mut self) {
        self.open = false;
    }

    fn error(&self, kind: TurnErrorKind, message: String, source: Option<&str>) -> TurnError {
        let mut metadata = BTreeMap::new();
        metadata.insert("error".into(), message.clone());
        metadata.insert("error_kind".into(), kind.as_str().into());
        if let Some(s) = source {
            metadata.insert("backend".into(), s.into());
        }
        TurnError {
            kind,
            message,
            envelope: ResultEnvelope {
                session_id: self.session.clone(),
                turn: self.turn,
                task: self.config.task,
                artifacts: Vec::new(),
                metadata,
                memory_refs: Vec::new(),
                terminal: self.state.terminal,
            },
        }
    }

    fn backend_error(&self, source: &str, e: impl ToString) -> TurnError {
        self.error(TurnErrorKind::Backend, format!("{source}: {}", e.to_string()), Some(source))
    }

    /// Base controls (the config's, or defaults with one frame per
    /// action), a per-turn seed, then the input's named overrides.
    fn controls_for(&self, input: &TurnInput, n_actions: usize) -> Result<SynthesisControls, SynthesisError> {
        let mut c = self.config.controls.unwrap_or(SynthesisControls {
            frame_budget: n_actions.max(1) as u32,
            ..SynthesisControls::default()
        });
        c.seed = per_turn_seed(self.config.seed, self.turn);
        for (name, value) in &input.controls {
            c.set(name, *value)?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Runs exactly one turn.
    pub fn call_once(&mut self, input: &TurnInput) -> Result<ResultEnvelope, TurnError> {
        if !self.open {
            return Err(self.error(TurnErrorKind::Closed, "session closed".into(), None));
        }
        if self.state.terminal {
            return Err(self.error(TurnErrorKind::Terminal, "session terminal".into(), None));
        }

        // validate
        let w = self.kernel.config().window_size();
        let mut operator = self.operator.clone();
        let normalized = operator
            .normalize(&input.signals, input.observation.as_ref(), input.query.as_deref(), (w, w))
            .map_err(|e| self.error(TurnErrorKind::Rejected, e.to_string(), None))?;
        let template = operator.template().clone();
        let mut actions = Vec::new();
        for id in normalized.actions.action_ids() {
            let token = &template.tokens()[id];
            match KernelAction::from_token(token) {
                Some(a) => actions.push(a),
                None => {
                    return Err(self.error(
                        TurnErrorKind::Rejected,
                        format!("{token} has no kernel action"),
                        None,
                    ))
                }
            }
        }
        let controls = self
            .controls_for(input, actions.len())
            .map_err(|e| self.error(TurnErrorKind::Rejected, e.to_string(), None))?;
        let mut camera = self.camera;
        for (kind, v) in normalized.actions.controls() {
            match kind {
                AngleKind::Polar => camera.polar = v,
                AngleKind::Azimuth => camera.azimuth = v,
                AngleKind::Yaw => camera.yaw = v,
            }
        }

        // memory context
        let current = self.kernel.observe(&self.state);
        let feature = match &input.query {
            Some(q) => featurize(Modality::Text, q.as_bytes()),
            None => featurize(Modality::Image, &encode_frame(&current)),
        };
        let now_step = self.memory.session(&self.session).map_or(0, |s| s.next_step());
        let memory_refs: Vec<String> = self
            .memory
            .select(&self.session, &ContextQuery { feature, now_step }, CONTEXT_K)
            .map(|v| v.into_iter().map(|s| s.record.id.clone()).collect())
            .unwrap_or_default();

        // dispatch
        let mut meta = BTreeMap::new();
        meta.insert("context_size".into(), memory_refs.len().to_string());
        let out = match self.config.task {
            Task::Navigate | Task::Act | Task::Sonify => {
                let backend = self.backend.as_ref().expect("routed task has a backend");
                let request = SynthesisRequest {
                    input: &normalized,
                    actions: &actions,
                    state: &self.state,
                    kernel: &self.kernel,
                    controls,
                };
                let art = backend
                    .predict(&request)
                    .map_err(|e| self.backend_error(backend.id(), e))?;
                meta.extend(art.metadata);
                let mut out = Outcome::new(meta);
                if self.config.task == Task::Navigate {
                    let executed = art.rollout.len();
                    let keep = (controls.frame_budget as usize).min(executed).max(1);
                    out.artifacts = art
                        .payloads
                        .into_iter()
                        .take(keep)
                        .map(|(m, p)| Artifact::new(m, p))
                        .collect();
                    let reward: f64 = art.rollout.iter().map(|s| s.reward).sum();
                    out.reward = Some(reward);
                    out.next_state = art.rollout.last().map(|s| s.state);
                    let mut grid = self.grid.clone();
                    for s in &art.rollout {
                        grid.fuse_observation(&self.kernel.observe(&s.state), s.state.pose)
                            .map_err(|e| self.backend_error(REPRESENTATION_ID, e))?;
                    }
                    out.grid = Some(grid);
                    out.metadata.insert("frames".into(), keep.to_string());
                } else {
                    out.artifacts = art.payloads.into_iter().map(|(m, p)| Artifact::new(m, p)).collect();
                }
                out
            }
            Task::Reason => {
                let text = input.query.as_deref().unwrap_or("");
                let kind = input.kind.unwrap_or(ReasoningKind::General);
                let answer: ReasoningAnswer = match kind {
                    ReasoningKind::Spatial => infer_spatial(text, &self.state, self.kernel.map())
                        .map_err(|e| self.backend_error(REASONER_ID, e))?,
                    ReasoningKind::Audio => {
                        let wave = input.audio.as_ref().ok_or_else(|| {
                            self.backend_error(REASONER_ID, crate::reasoning::ReasoningError::MissingContext(kind))
                        })?;
                        infer_audio(wave).map_err(|e| self.backend_error(REASONER_ID, e))?
                    }
                    ReasoningKind::General => {
                        let ctx = SessionContext {
                            state: self.state,
                            turn: self.turn,
                            last_reward: self.last_reward,
                        };
                        self.reasoner.infer_general(text, Some(&ctx))
                    }
                };
                meta.insert("backend".into(), REASONER_ID.into());
                meta.insert("kind".into(), kind.to_string());
                if let Some(s) = &answer.structured {
                    for (k, v) in s {
                        meta.insert(format!("answer.{k}"), v.clone());
                    }
                }
                let mut out = Outcome::new(meta);
                out.artifacts.push(Artifact::new(Modality::Text, answer.text.into_bytes()));
                out
            }
            Task::Reconstruct => {
                let frame = normalized.observation.clone().unwrap_or_else(|| current.clone());
                let mut grid = self.grid.clone();
                grid.fuse_observation(&frame, self.state.pose)
                    .map_err(|e| self.backend_error(REPRESENTATION_ID, e))?;
                let export = grid.export_points();
                meta.insert("backend".into(), REPRESENTATION_ID.into());
                meta.insert("points".into(), export.points.len().to_string());
                meta.insert("known_cells".into(), grid.known_cells().to_string());
                let mut out = Outcome::new(meta);
                out.artifacts
                    .push(Artifact::new(Modality::PointCloud, format_wkpc(&export.points).into_bytes()));
                out.grid = Some(grid);
                out
            }
        };

        // commit: nothing below can fail
        let mut out = out;
        if let Some(g) = out.grid.take() {
            self.grid = g;
        }
        self.operator = operator;
        self.camera = camera;
        if let Some(s) = out.next_state {
            self.state = s;
        }
        if let Some(r) = out.reward {
            self.cumulative_reward += r;
            self.last_reward = Some(r);
            out.metadata.insert("reward".into(), fmt_reward(r));
        }
        out.metadata.insert("cumulative_reward".into(), fmt_reward(self.cumulative_reward));
        out.metadata.insert("pose".into(), fmt_pose(&self.state));
        out.metadata.insert("step".into(), self.state.step.to_string());
        out.metadata.insert(
            "camera".into(),
            format!("{},{},{}", self.camera.polar, self.camera.azimuth, self.camera.yaw),
        );

        let envelope = ResultEnvelope {
            session_id: self.session.clone(),
            turn: self.turn,
            task: self.config.task,
            artifacts: out.artifacts,
            metadata: out.metadata,
            memory_refs,
            terminal: self.state.terminal,
        };

        // memory write: one observation record and one input record
        let mut rec_meta = BTreeMap::new();
        rec_meta.insert("turn".to_string(), self.turn.to_string());
        rec_meta.insert("task".to_string(), self.config.task.to_string());
        let obs = encode_frame(&self.kernel.observe(&self.state));
        let _ = self.memory.record(&self.session, (Modality::Image, &obs), rec_meta.clone());
        let (modality, payload) = match &input.query {
            Some(q) => (Modality::Text, q.clone().into_bytes()),
            None => {
                let tokens: Vec<&str> = actions.iter().map(|a| a.token()).collect();
                (Modality::Action, tokens.join(",").into_bytes())
            }
        };
        let _ = self.memory.record(&self.session, (modality, &payload), rec_meta);
        let _ = self.memory.manage(&self.session);

        self.turn += 1;
        Ok(envelope)
    }

    /// Feeds inputs one at a time; errors arrive in-band as error
    /// envelopes. The sequence ends after the first terminal envelope.
    pub fn stream<I>(&mut self, inputs: I) -> Stream<'_, I::IntoIter>
    where
        I: IntoIterator<Item = TurnInput>,
    {
        Stream {
            pipeline: self,
            inputs: inputs.into_iter(),
            done: false,
        }
    }
}

pub struct Stream<'a, I> {
    pipeline: &'a mut Pipeline,
    inputs: I,
    done: bool,
}

impl<I: Iterator<Item = TurnInput>> Iterator for Stream<'_, I> {
    type Item = ResultEnvelope;

    fn next(&mut self) -> Option<ResultEnvelope> {
        if self.done {
            return None;
        }
        let input = self.inputs.next()?;
        let env = match self.pipeline.call_once(&input) {
            Ok(e) => e,
            Err(e) => e.envelope,
        };
        if env.terminal || !self.pipeline.is_open() {
            self.done = true;
        }
        Some(env)
    }
}

/// Tokens of the default template in shorthand form.
pub fn expand_shorthand(token: &str) -> Option<&'static str> {
    Some(match token.trim() {
        "F" => "move_forward",
        "B" => "move_backward",
        "L" => "move_left",
        "R" => "move_right",
        "TL" => "turn_left",
        "TR" => "turn_right",
        _ => return None,
    })
}

/// Parses a comma-separated action list; shorthand and full tokens mix.
pub fn parse_action_list(text: &str) -> Vec<String> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| expand_shorthand(t).map_or_else(|| t.to_string(), Into::into))
        .collect()
}
