//! JSON wire forms for envelopes and session requests.
//!
//! Frame payloads travel as `{width, height, pixels}` with base64 pixels;
//! UTF-8 payloads of text-like modalities travel as plain strings; anything
//! else is base64 under `data`. Decoding reproduces the core envelope
//! byte for byte.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use worldkit_core::memory::{MemoryRecord, SessionMemory};
use worldkit_core::operator::InteractionSignal;
use worldkit_core::pipeline::TurnInput;
use worldkit_core::reasoning::ReasoningKind;
use worldkit_core::representation::DepthMap;
use worldkit_core::synthesis::audio::decode_waveform;
use worldkit_core::{
    decode_frame, encode_frame, Artifact, Modality, ObservationFrame, PipelineConfig, ResultEnvelope, SessionId,
    Task,
};

#[derive(Debug, thiserror::Error)]
pub enum WireError {
    #[error("artifact {0} must carry exactly one of frame, text or data")]
    ArtifactBody(usize),
    #[error("bad base64 in {field}: {source}")]
    Base64 {
        field: &'static str,
        source: base64::DecodeError,
    },
    #[error("bad frame: {0}")]
    Frame(#[from] worldkit_core::FrameError),
    #[error("bad waveform: {0}")]
    Waveform(#[from] worldkit_core::synthesis::audio::WaveformError),
    #[error("unknown reasoning kind {0:?}")]
    ReasoningKind(String),
}

fn b64(field: &'static str, text: &str) -> Result<Vec<u8>, WireError> {
    B64.decode(text).map_err(|source| WireError::Base64 { field, source })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireFrame {
    pub width: u32,
    pub height: u32,
    pub pixels: String,
}

impl WireFrame {
    pub fn from_frame(f: &ObservationFrame) -> Self {
        Self {
            width: f.width(),
            height: f.height(),
            pixels: B64.encode(f.pixels()),
        }
    }

    pub fn to_frame(&self) -> Result<ObservationFrame, WireError> {
        let px = b64("pixels", &self.pixels)?;
        Ok(ObservationFrame::new(self.width, self.height, px)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireArtifact {
    pub modality: Modality,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<WireFrame>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
}

fn is_textual(m: Modality) -> bool {
    matches!(m, Modality::Text | Modality::Action | Modality::PointCloud)
}

impl WireArtifact {
    pub fn from_artifact(a: &Artifact) -> Self {
        let mut w = Self {
            modality: a.modality,
            frame: None,
            text: None,
            data: None,
        };
        if matches!(a.modality, Modality::Image | Modality::VideoFrames) {
            if let Ok(f) = decode_frame(&a.payload) {
                w.frame = Some(WireFrame::from_frame(&f));
                return w;
            }
        }
        if is_textual(a.modality) {
            if let Ok(s) = std::str::from_utf8(&a.payload) {
                w.text = Some(s.to_owned());
                return w;
            }
        }
        w.data = Some(B64.encode(&a.payload));
        w
    }

    pub fn to_artifact(&self, index: usize) -> Result<Artifact, WireError> {
        let payload = match (&self.frame, &self.text, &self.data) {
            (Some(f), None, None) => encode_frame(&f.to_frame()?),
            (None, Some(t), None) => t.clone().into_bytes(),
            (None, None, Some(d)) => b64("data", d)?,
            _ => return Err(WireError::ArtifactBody(index)),
        };
        Ok(Artifact::new(self.modality, payload))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireEnvelope {
    pub session_id: String,
    pub turn: u64,
    pub task: Task,
    pub artifacts: Vec<WireArtifact>,
    pub metadata: BTreeMap<String, String>,
    pub memory_refs: Vec<String>,
    pub terminal: bool,
}

impl WireEnvelope {
    pub fn encode(env: &ResultEnvelope) -> Self {
        Self {
            session_id: env.session_id.as_str().to_owned(),
            turn: env.turn,
            task: env.task,
            artifacts: env.artifacts.iter().map(WireArtifact::from_artifact).collect(),
            metadata: env.metadata.clone(),
            memory_refs: env.memory_refs.clone(),
            terminal: env.terminal,
        }
    }

    pub fn decode(&self) -> Result<ResultEnvelope, WireError> {
        Ok(ResultEnvelope {
            session_id: SessionId::from_existing(self.session_id.clone()),
            turn: self.turn,
            task: self.task,
            artifacts: self
                .artifacts
                .iter()
                .enumerate()
                .map(|(i, a)| a.to_artifact(i))
                .collect::<Result<_, _>>()?,
            metadata: self.metadata.clone(),
            memory_refs: self.memory_refs.clone(),
            terminal: self.terminal,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireQuery {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    pub text: String,
    /// Session whose state supplies context. Only the stepped session
    /// itself is accepted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_ref: Option<String>,
}

/// Body of `POST /sessions/{id}/step`; also the input record of session logs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRequest {
    /// Tokens, or `{name, value}` camera controls.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub actions: Vec<InteractionSignal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<WireQuery>,
    /// Named synthesis control overrides.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub controls: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<WireFrame>,
    /// Base64 of the portable waveform encoding.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio: Option<String>,
}

impl StepRequest {
    pub fn actions<S: AsRef<str>>(tokens: &[S]) -> Self {
        Self {
            actions: tokens.iter().map(|t| InteractionSignal::token(t.as_ref())).collect(),
            ..Self::default()
        }
    }

    pub fn query(kind: Option<&str>, text: &str) -> Self {
        Self {
            query: Some(WireQuery {
                kind: kind.map(Into::into),
                text: text.into(),
                context_ref: None,
            }),
            ..Self::default()
        }
    }

    pub fn to_turn_input(&self) -> Result<TurnInput, WireError> {
        let (query, kind) = match &self.query {
            Some(q) => {
                let kind = q
                    .kind
                    .as_deref()
                    .map(|k| k.parse::<ReasoningKind>().map_err(|_| WireError::ReasoningKind(k.into())))
                    .transpose()?;
                (Some(q.text.clone()), kind)
            }
            None => (None, None),
        };
        Ok(TurnInput {
            signals: self.actions.clone(),
            query,
            kind,
            controls: self.controls.clone(),
            observation: self.observation.as_ref().map(WireFrame::to_frame).transpose()?,
            audio: self
                .audio
                .as_deref()
                .map(|a| b64("audio", a).and_then(|b| Ok(decode_waveform(&b)?)))
                .transpose()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    #[serde(default)]
    pub config: Option<PipelineConfig>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireCamera {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub polar: f64,
    pub azimuth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireDepth {
    pub camera: WireCamera,
    pub rays: u32,
    pub fov: f64,
    pub depths: Vec<f64>,
}

impl WireDepth {
    pub fn new(camera: WireCamera, depth: DepthMap) -> Self {
        Self {
            camera,
            rays: depth.rays,
            fov: depth.fov,
            depths: depth.depths,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordSummary {
    pub id: String,
    pub step: u64,
    pub modality: Modality,
    pub weight: u64,
    pub pinned: bool,
    pub payload_digest: String,
    pub metadata: BTreeMap<String, String>,
}

impl From<&MemoryRecord> for RecordSummary {
    fn from(r: &MemoryRecord) -> Self {
        Self {
            id: r.id.clone(),
            step: r.step,
            modality: r.modality,
            weight: r.weight,
            pinned: r.pinned,
            payload_digest: r.payload_digest.clone(),
            metadata: r.metadata.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryView {
    pub session_id: String,
    pub next_step: u64,
    pub records: Vec<RecordSummary>,
}

impl MemoryView {
    pub fn new(id: &SessionId, mem: &SessionMemory) -> Self {
        Self {
            session_id: id.as_str().to_owned(),
            next_step: mem.next_step(),
            records: mem.records().iter().map(RecordSummary::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}
