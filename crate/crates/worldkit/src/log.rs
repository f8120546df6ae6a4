//! Replayable session logs.
//!
//! A log is JSON lines: one header carrying the config, then one line per
//! turn with the wire input, the resulting envelope, its digest and a
//! running chain digest over inputs and envelopes. Replay re-executes the
//! inputs on a fresh pipeline, regenerates the whole file and demands a
//! byte-identical match, so any edit anywhere in the log is caught.

use std::path::Path;

use serde::{Deserialize, Serialize};
use worldkit_core::envelope::TIMESTAMP_KEY;
use worldkit_core::hash::{hex64, Fnv64};
use worldkit_core::pipeline::BuildError;
use worldkit_core::{Pipeline, PipelineConfig, ResultEnvelope, SessionId};

use crate::wire::{StepRequest, WireEnvelope, WireError};

pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogLine {
    Header {
        version: u32,
        session_id: String,
        config: PipelineConfig,
        config_digest: String,
    },
    Turn {
        index: u64,
        input: StepRequest,
        envelope: WireEnvelope,
        envelope_digest: String,
        chain: String,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("invalid input: {0}")]
    Wire(#[from] WireError),
    #[error("log io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("log is empty")]
    Empty,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("first line is not a header")]
    MissingHeader,
    #[error("unsupported log version {0}")]
    Version(u32),
    #[error("line {line}: {source}")]
    Turn { line: usize, source: LogError },
    #[error("replay diverges from the log at line {line}")]
    Mismatch { line: usize },
    #[error(transparent)]
    Log(#[from] LogError),
}

fn config_digest(session: &SessionId, config: &PipelineConfig) -> u64 {
    let json = serde_json::to_vec(config).expect("config serializes");
    Fnv64::new()
        .update(session.as_str().as_bytes())
        .update(&[0])
        .update(&json)
        .finish()
}

/// Outcome of one recorded turn.
#[derive(Debug, Clone, PartialEq)]
pub struct Recorded {
    pub envelope: ResultEnvelope,
    pub ok: bool,
}

/// A pipeline plus the log of everything it has executed.
pub struct SessionRecorder {
    pipeline: Pipeline,
    lines: Vec<String>,
    chain: u64,
}

impl SessionRecorder {
    pub fn new(config: PipelineConfig, session: SessionId) -> Result<Self, LogError> {
        let digest = config_digest(&session, &config);
        let header = LogLine::Header {
            version: LOG_VERSION,
            session_id: session.as_str().to_owned(),
            config: config.clone(),
            config_digest: hex64(digest),
        };
        let pipeline = Pipeline::build_with_id(config, session)?;
        Ok(Self {
            pipeline,
            lines: vec![serde_json::to_string(&header).expect("header serializes")],
            chain: digest,
        })
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn pipeline_mut(&mut self) -> &mut Pipeline {
        &mut self.pipeline
    }

    pub fn turns(&self) -> usize {
        self.lines.len() - 1
    }

    /// Runs one turn. Inputs that fail wire decoding are not logged;
    /// error envelopes from the pipeline are.
    pub fn step(&mut self, request: &StepRequest) -> Result<Recorded, LogError> {
        let input = request.to_turn_input()?;
        let (mut envelope, ok) = match self.pipeline.call_once(&input) {
            Ok(e) => (e, true),
            Err(e) => (e.envelope, false),
        };
        envelope.metadata.remove(TIMESTAMP_KEY);
        let input_json = serde_json::to_vec(request).expect("request serializes");
        let digest = envelope.digest();
        self.chain = Fnv64::new()
            .update(&self.chain.to_be_bytes())
            .update(&input_json)
            .update(&digest.to_be_bytes())
            .finish();
        let line = LogLine::Turn {
            index: self.turns() as u64,
            input: request.clone(),
            envelope: WireEnvelope::encode(&envelope),
            envelope_digest: hex64(digest),
            chain: hex64(self.chain),
        };
        self.lines.push(serde_json::to_string(&line).expect("turn serializes"));
        Ok(Recorded { envelope, ok })
    }

    pub fn text(&self) -> String {
        let mut out = self.lines.join("\n");
        out.push('\n');
        out
    }

    pub fn write_to(&self, path: &Path) -> Result<(), LogError> {
        std::fs::write(path, self.text())?;
        Ok(())
    }
}

/// Re-executes a log and checks the regenerated bytes against it.
pub fn replay(text: &str) -> Result<SessionRecorder, ReplayError> {
    let mut lines = text.split_inclusive('\n');
    let first = lines.next().ok_or(ReplayError::Empty)?;
    let parse = |line: usize, s: &str| -> Result<LogLine, ReplayError> {
        serde_json::from_str(s.trim_end_matches('\n')).map_err(|e| ReplayError::Parse {
            line,
            message: e.to_string(),
        })
    };
    let LogLine::Header {
        version,
        session_id,
        config,
        ..
    } = parse(1, first)?
    else {
        return Err(ReplayError::MissingHeader);
    };
    if version != LOG_VERSION {
        return Err(ReplayError::Version(version));
    }
    let mut rec = SessionRecorder::new(config, SessionId::from_existing(session_id))?;
    for (i, raw) in lines.enumerate() {
        let line = i + 2;
        match parse(line, raw)? {
            LogLine::Turn { input, .. } => {
                rec.step(&input).map_err(|source| ReplayError::Turn { line, source })?;
            }
            LogLine::Header { .. } => {
                return Err(ReplayError::Parse {
                    line,
                    message: "unexpected second header".into(),
                })
            }
        }
    }
    let regenerated = rec.text();
    if regenerated != text {
        let line = regenerated
            .split_inclusive('\n')
            .zip(text.split_inclusive('\n'))
            .position(|(a, b)| a != b)
            .map_or_else(|| regenerated.lines().count().min(text.lines().count()) + 1, |p| p + 1);
        return Err(ReplayError::Mismatch { line });
    }
    Ok(rec)
}

pub fn replay_file(path: &Path) -> Result<SessionRecorder, ReplayError> {
    let text = std::fs::read_to_string(path).map_err(LogError::from)?;
    replay(&text)
}
