//! Generative backends: visual frame prediction, audio tones and action plans.
//!
//! Every backend implements [`SynthesisBackend`] and is obtained through
//! [`load_backend`]. Local descriptors resolve to the reference backends in
//! this module; hosted descriptors bind to a [`hosted::HostedBackend`] over a
//! stub transport.

pub mod action;
pub mod audio;
pub mod hosted;
pub mod visual;

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::kernel::{KernelAction, KernelError, WorldKernel, WorldState};
use crate::modality::Modality;
use crate::operator::NormalizedInput;

pub use action::{plan_to_goal, PlannerPolicy};
pub use audio::{decode_waveform, encode_waveform, AudioEvent, ToneSynthesizer, Waveform};
pub use hosted::{HostedBackend, HostedRequest, StubTransport, Transport, TransportError};
pub use visual::GridFrameSynthesizer;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthesisError {
    #[error("initial state is terminal")]
    TerminalState,
    #[error("invalid controls: {0}")]
    InvalidControls(String),
    #[error("unknown audio event {0:?}")]
    UnknownEvent(String),
    #[error("audio duration must be positive")]
    NonPositiveDuration,
    #[error("unsupported goal {0:?}")]
    UnsupportedGoal(String),
    #[error("goal unreachable")]
    GoalUnreachable,
    #[error("hosted backend requires credentials")]
    MissingCredentials,
    #[error("backend kind mismatch: {backend} cannot serve {requested}")]
    KindMismatch {
        backend: BackendKind,
        requested: BackendKind,
    },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Visual,
    Audio,
    Action,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Visual => "visual",
            BackendKind::Audio => "audio",
            BackendKind::Action => "action",
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown backend kind {0:?}")]
pub struct UnknownBackendKind(pub String);

impl FromStr for BackendKind {
    type Err = UnknownBackendKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "visual" => Ok(BackendKind::Visual),
            "audio" => Ok(BackendKind::Audio),
            "action" => Ok(BackendKind::Action),
            other => Err(UnknownBackendKind(other.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum BackendSource {
    /// Path to local weights. Reference backends carry no weights and ignore it.
    Local {
        #[serde(default)]
        weights: Option<String>,
    },
    Hosted { endpoint: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Credentials {
    pub api_key: String,
    pub endpoint: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendDescriptor {
    pub kind: BackendKind,
    pub source: BackendSource,
    #[serde(default)]
    pub credentials: Option<Credentials>,
}

impl BackendDescriptor {
    pub fn local(kind: BackendKind) -> Self {
        Self {
            kind,
            source: BackendSource::Local { weights: None },
            credentials: None,
        }
    }

    pub fn validate(&self) -> Result<(), SynthesisError> {
        if matches!(self.source, BackendSource::Hosted { .. }) && self.credentials.is_none() {
            return Err(SynthesisError::MissingCredentials);
        }
        Ok(())
    }
}

/// Modality-specific generation knobs. `guidance` and `sampling_steps` are
/// echoed into metadata; the reference backends do not use them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisControls {
    pub resolution_scale: u32,
    pub frame_budget: u32,
    pub duration_s: f64,
    pub seed: u64,
    pub guidance: f64,
    pub sampling_steps: u32,
}

impl Default for SynthesisControls {
    fn default() -> Self {
        Self {
            resolution_scale: 1,
            frame_budget: 1,
            duration_s: 0.25,
            seed: 0,
            guidance: 1.0,
            sampling_steps: 1,
        }
    }
}

impl SynthesisControls {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        let bad = |m: &str| Err(SynthesisError::InvalidControls(m.into()));
        if self.resolution_scale == 0 {
            return bad("resolution_scale must be at least 1");
        }
        if self.resolution_scale > 64 {
            return bad("resolution_scale must be at most 64");
        }
        if self.frame_budget == 0 {
            return bad("frame_budget must be at least 1");
        }
        if self.sampling_steps == 0 {
            return bad("sampling_steps must be at least 1");
        }
        if !self.duration_s.is_finite() || !self.guidance.is_finite() {
            return bad("duration_s and guidance must be finite");
        }
        Ok(())
    }

    /// Applies a named override; unknown names are rejected.
    pub fn set(&mut self, name: &str, value: f64) -> Result<(), SynthesisError> {
        let as_u32 = |v: f64| -> Result<u32, SynthesisError> {
            if v >= 0.0 && v <= u32::MAX as f64 && libm::trunc(v) == v {
                Ok(v as u32)
            } else {
                Err(SynthesisError::InvalidControls(alloc::format!("{name} must be a non-negative integer")))
            }
        };
        match name {
            "resolution_scale" => self.resolution_scale = as_u32(value)?,
            "frame_budget" => self.frame_budget = as_u32(value)?,
            "duration_s" => self.duration_s = value,
            "seed" => self.seed = as_u32(value)? as u64,
            "guidance" => self.guidance = value,
            "sampling_steps" => self.sampling_steps = as_u32(value)?,
            other => {
                return Err(SynthesisError::InvalidControls(alloc::format!("unknown control {other}")))
            }
        }
        Ok(())
    }

    fn echo(&self, meta: &mut BTreeMap<String, String>) {
        meta.insert("seed".into(), self.seed.to_string());
        meta.insert("guidance".into(), self.guidance.to_string());
        meta.insert("sampling_steps".into(), self.sampling_steps.to_string());
    }
}

/// Everything a backend may condition on for one call.
#[derive(Debug, Clone, Copy)]
pub struct SynthesisRequest<'a> {
    pub input: &'a NormalizedInput,
    /// Kernel actions decoded from the validated batch, in order.
    pub actions: &'a [KernelAction],
    pub state: &'a WorldState,
    pub kernel: &'a WorldKernel,
    pub controls: SynthesisControls,
}

/// One executed kernel step inside a visual prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutStep {
    pub action: KernelAction,
    pub state: WorldState,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SynthesisArtifact {
    pub payloads: Vec<(Modality, Vec<u8>)>,
    pub metadata: BTreeMap<String, String>,
    /// Kernel steps behind the payloads; empty for non-visual backends.
    pub rollout: Vec<RolloutStep>,
}

pub trait SynthesisBackend: Send {
    fn id(&self) -> &str;
    fn kind(&self) -> BackendKind;
    fn predict(&self, request: &SynthesisRequest<'_>) -> Result<SynthesisArtifact, SynthesisError>;
}

pub type BoxedBackend = Box<dyn SynthesisBackend>;

/// Resolves a descriptor to an inference-ready backend.
pub fn load_backend(descriptor: &BackendDescriptor) -> Result<BoxedBackend, SynthesisError> {
    descriptor.validate()?;
    Ok(match (&descriptor.source, descriptor.kind) {
        (BackendSource::Hosted { .. }, _) => {
            Box::new(HostedBackend::new(descriptor.clone(), StubTransport::default())?)
        }
        (BackendSource::Local { .. }, BackendKind::Visual) => Box::new(GridFrameSynthesizer),
        (BackendSource::Local { .. }, BackendKind::Audio) => Box::new(ToneSynthesizer),
        (BackendSource::Local { .. }, BackendKind::Action) => Box::new(PlannerPolicy),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lookup() {
        let v = load_backend(&BackendDescriptor::local(BackendKind::Visual)).unwrap();
        assert_eq!((v.kind(), v.id()), (BackendKind::Visual, visual::BACKEND_ID));
        let a = load_backend(&BackendDescriptor::local(BackendKind::Action)).unwrap();
        assert_eq!((a.kind(), a.id()), (BackendKind::Action, action::BACKEND_ID));
        let hosted_no_creds = BackendDescriptor {
            kind: BackendKind::Audio,
            source: BackendSource::Hosted {
                endpoint: "https://example.invalid/audio".into(),
            },
            credentials: None,
        };
        assert_eq!(load_backend(&hosted_no_creds).err(), Some(SynthesisError::MissingCredentials));
        assert!("lidar".parse::<BackendKind>().is_err());
    }

    #[test]
    fn controls_reject_unknown_and_zero() {
        let mut c = SynthesisControls::default();
        assert!(c.set("temperature", 1.0).is_err());
        c.set("frame_budget", 0.0).unwrap();
        assert!(c.validate().is_err());
        c.set("frame_budget", 3.0).unwrap();
        c.validate().unwrap();
        assert!(c.set("resolution_scale", 1.5).is_err());
    }
}
