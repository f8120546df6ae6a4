//! The standardized per-turn result record.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::hash::{hex64, Fnv64};
use crate::modality::Modality;

/// Metadata key holding wall-clock time. Never part of a digest.
pub const TIMESTAMP_KEY: &str = "timestamp_ms";

/// Opaque, framework-generated session identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(String);

impl SessionId {
    /// Deterministic id from a seed and a disambiguating nonce.
    pub fn derive(seed: u64, nonce: u64) -> Self {
        let mut h = Fnv64::new();
        h.update(b"session").update(&seed.to_be_bytes()).update(&nonce.to_be_bytes());
        let mut s = String::from("s");
        s.push_str(&hex64(h.finish()));
        Self(s)
    }

    /// Re-wraps an id previously handed out by [`SessionId::derive`].
    pub fn from_existing(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Navigate,
    Reconstruct,
    Act,
    Reason,
    Sonify,
}

impl Task {
    pub const ALL: [Task; 5] = [
        Task::Navigate,
        Task::Reconstruct,
        Task::Act,
        Task::Reason,
        Task::Sonify,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Navigate => "navigate",
            Task::Reconstruct => "reconstruct",
            Task::Act => "act",
            Task::Reason => "reason",
            Task::Sonify => "sonify",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown task {0:?}")]
pub struct UnknownTask(pub String);

impl FromStr for Task {
    type Err = UnknownTask;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| UnknownTask(s.into()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub modality: Modality,
    pub payload: Vec<u8>,
}

impl Artifact {
    pub fn new(modality: Modality, payload: Vec<u8>) -> Self {
        Self { modality, payload }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultEnvelope {
    pub session_id: SessionId,
    pub turn: u64,
    pub task: Task,
    pub artifacts: Vec<Artifact>,
    pub metadata: BTreeMap<String, String>,
    pub memory_refs: Vec<String>,
    pub terminal: bool,
}

impl ResultEnvelope {
    pub fn is_error(&self) -> bool {
        self.metadata.contains_key("error")
    }

    pub fn error_message(&self) -> Option<&str> {
        self.metadata.get("error").map(String::as_str)
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).map(String::as_str)
    }

    /// Length-prefixed binary form covering every field except timestamps.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        fn put(out: &mut Vec<u8>, bytes: &[u8]) {
            out.extend_from_slice(&(bytes.len() as u64).to_be_bytes());
            out.extend_from_slice(bytes);
        }
        let mut out = Vec::new();
        put(&mut out, self.session_id.as_str().as_bytes());
        out.extend_from_slice(&self.turn.to_be_bytes());
        put(&mut out, self.task.as_str().as_bytes());
        out.extend_from_slice(&(self.artifacts.len() as u64).to_be_bytes());
        for a in &self.artifacts {
            out.push(a.modality.tag());
            put(&mut out, &a.payload);
        }
        let meta: Vec<_> = self
            .metadata
            .iter()
            .filter(|(k, _)| k.as_str() != TIMESTAMP_KEY)
            .collect();
        out.extend_from_slice(&(meta.len() as u64).to_be_bytes());
        for (k, v) in meta {
            put(&mut out, k.as_bytes());
            put(&mut out, v.as_bytes());
        }
        out.extend_from_slice(&(self.memory_refs.len() as u64).to_be_bytes());
        for r in &self.memory_refs {
            put(&mut out, r.as_bytes());
        }
        out.push(self.terminal as u8);
        out
    }

    pub fn digest(&self) -> u64 {
        Fnv64::new().update(&self.canonical_bytes()).finish()
    }
}
