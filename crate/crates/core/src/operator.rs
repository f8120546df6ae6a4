//! Validation and preprocessing between raw input and the execution modules.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::frame::{FrameError, ObservationFrame};
use crate::pose::{normalize_control, AngleKind};

pub const DEFAULT_TOKENS: [&str; 6] = [
    "move_forward",
    "move_backward",
    "move_left",
    "move_right",
    "turn_left",
    "turn_right",
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OperatorError {
    #[error("{0} not in template")]
    UnknownToken(String),
    #[error("control {0} not in template")]
    UnknownControl(String),
    #[error("control {0} has a non-finite value")]
    NonFiniteControl(String),
    #[error("invalid interaction template: {0}")]
    InvalidTemplate(String),
    #[error("cannot resize {from_w}x{from_h} to {to_w}x{to_h}: not an integer block factor")]
    NonIntegerScale {
        from_w: u32,
        from_h: u32,
        to_w: u32,
        to_h: u32,
    },
    #[error("resize target must have non-zero dimensions")]
    ZeroTarget,
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// The action vocabulary a session accepts. Token order defines action ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionTemplate {
    tokens: Vec<String>,
    controls: Vec<AngleKind>,
}

impl Default for InteractionTemplate {
    fn default() -> Self {
        Self {
            tokens: DEFAULT_TOKENS.iter().map(|t| t.to_string()).collect(),
            controls: alloc::vec![AngleKind::Polar, AngleKind::Azimuth, AngleKind::Yaw],
        }
    }
}

impl InteractionTemplate {
    pub fn new(tokens: Vec<String>, controls: Vec<AngleKind>) -> Result<Self, OperatorError> {
        let t = Self { tokens, controls };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), OperatorError> {
        if self.tokens.is_empty() {
            return Err(OperatorError::InvalidTemplate("no tokens".into()));
        }
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.is_empty() {
                return Err(OperatorError::InvalidTemplate("empty token".into()));
            }
            if self.tokens[..i].contains(tok) {
                return Err(OperatorError::InvalidTemplate(format!("duplicate token {tok}")));
            }
        }
        Ok(())
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn controls(&self) -> &[AngleKind] {
        &self.controls
    }

    pub fn token_id(&self, token: &str) -> Option<usize> {
        self.tokens.iter().position(|t| t == token)
    }
}

/// One action: a discrete token or a named continuous camera control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InteractionSignal {
    Token(String),
    Control { name: String, value: f64 },
}

impl InteractionSignal {
    pub fn token(t: &str) -> Self {
        InteractionSignal::Token(t.into())
    }

    pub fn control(name: &str, value: f64) -> Self {
        InteractionSignal::Control {
            name: name.into(),
            value,
        }
    }
}

/// A signal after validation: token id in template order, or a normalized angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProcessedSignal {
    Action(usize),
    Control(AngleKind, f64),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProcessedInteraction {
    pub signals: Vec<ProcessedSignal>,
}

impl ProcessedInteraction {
    pub fn action_ids(&self) -> Vec<usize> {
        self.signals
            .iter()
            .filter_map(|s| match s {
                ProcessedSignal::Action(id) => Some(*id),
                ProcessedSignal::Control(..) => None,
            })
            .collect()
    }

    pub fn controls(&self) -> Vec<(AngleKind, f64)> {
        self.signals
            .iter()
            .filter_map(|s| match s {
                ProcessedSignal::Control(k, v) => Some((*k, *v)),
                ProcessedSignal::Action(_) => None,
            })
            .collect()
    }
}

/// Operator output handed to the execution modules.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NormalizedInput {
    pub actions: ProcessedInteraction,
    pub observation: Option<ObservationFrame>,
    pub text: Option<String>,
}

pub fn check_interaction(
    signal: &InteractionSignal,
    template: &InteractionTemplate,
) -> Result<(), OperatorError> {
    match signal {
        InteractionSignal::Token(t) => {
            if template.token_id(t).is_some() {
                Ok(())
            } else {
                Err(OperatorError::UnknownToken(t.clone()))
            }
        }
        InteractionSignal::Control { name, value } => {
            let known = AngleKind::from_name(name).is_some_and(|k| template.controls.contains(&k));
            if !known {
                return Err(OperatorError::UnknownControl(name.clone()));
            }
            if !value.is_finite() {
                return Err(OperatorError::NonFiniteControl(name.clone()));
            }
            Ok(())
        }
    }
}

/// Per-session operator holding the pending interaction batches.
#[derive(Debug, Clone, Default)]
pub struct Operator {
    template: InteractionTemplate,
    pending: Vec<Vec<InteractionSignal>>,
}

impl Operator {
    pub fn new(template: InteractionTemplate) -> Result<Self, OperatorError> {
        template.validate()?;
        Ok(Self {
            template,
            pending: Vec::new(),
        })
    }

    pub fn template(&self) -> &InteractionTemplate {
        &self.template
    }

    pub fn pending(&self) -> &[Vec<InteractionSignal>] {
        &self.pending
    }

    /// Validates every signal, then appends the whole list as one batch.
    /// Nothing is appended if any signal fails.
    pub fn get_interaction(&mut self, signals: &[InteractionSignal]) -> Result<(), OperatorError> {
        for s in signals {
            check_interaction(s, &self.template)?;
        }
        self.pending.push(signals.to_vec());
        Ok(())
    }

    /// Drains the pending batches into ids and normalized controls.
    pub fn process_interaction(&mut self) -> ProcessedInteraction {
        let mut out = ProcessedInteraction::default();
        for batch in self.pending.drain(..) {
            for s in batch {
                match s {
                    InteractionSignal::Token(t) => {
                        // validated on entry
                        if let Some(id) = self.template.token_id(&t) {
                            out.signals.push(ProcessedSignal::Action(id));
                        }
                    }
                    InteractionSignal::Control { name, value } => {
                        if let Some(kind) = AngleKind::from_name(&name) {
                            if let Ok(v) = normalize_control(kind, value) {
                                out.signals.push(ProcessedSignal::Control(kind, v));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn process_perception(
        &self,
        raw: &ObservationFrame,
        target: (u32, u32),
    ) -> Result<ObservationFrame, OperatorError> {
        process_perception(raw, target)
    }

    /// Full preprocessing of one turn's raw input.
    pub fn normalize(
        &mut self,
        signals: &[InteractionSignal],
        observation: Option<&ObservationFrame>,
        text: Option<&str>,
        target: (u32, u32),
    ) -> Result<NormalizedInput, OperatorError> {
        let observation = observation
            .map(|f| process_perception(f, target))
            .transpose()?;
        self.get_interaction(signals)?;
        Ok(NormalizedInput {
            actions: self.process_interaction(),
            observation,
            text: text.map(Into::into),
        })
    }
}

/// Integer-factor block average pooling; each output pixel is the rounded
/// mean of its source block.
pub fn process_perception(
    raw: &ObservationFrame,
    target: (u32, u32),
) -> Result<ObservationFrame, OperatorError> {
    let (tw, th) = target;
    if tw == 0 || th == 0 {
        return Err(OperatorError::ZeroTarget);
    }
    let (w, h) = (raw.width(), raw.height());
    if w % tw != 0 || h % th != 0 {
        return Err(OperatorError::NonIntegerScale {
            from_w: w,
            from_h: h,
            to_w: tw,
            to_h: th,
        });
    }
    let (fx, fy) = (w / tw, h / th);
    if fx == 1 && fy == 1 {
        return Ok(raw.clone());
    }
    let n = u64::from(fx) * u64::from(fy);
    let px = raw.pixels();
    let mut out = Vec::with_capacity(tw as usize * th as usize);
    for oy in 0..th {
        for ox in 0..tw {
            let mut sum = 0u64;
            for y in oy * fy..(oy + 1) * fy {
                let row = (y * w) as usize;
                for x in ox * fx..(ox + 1) * fx {
                    sum += u64::from(px[row + x as usize]);
                }
            }
            out.push(((sum + n / 2) / n) as u8);
        }
    }
    Ok(ObservationFrame::new(tw, th, out)?)
}
