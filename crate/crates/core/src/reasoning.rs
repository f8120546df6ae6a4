//! Templated reasoners over world state, audio and session context.
//!
//! Spatial templates: `goal_direction`, `wall_count` / `wall_count(r)`,
//! `distance_to_goal`. General templates: `pose?`, `step?`, `reward?`.
//! Anything else goes to the hosted route, which answers
//! `{"status": "unsupported"}` when it cannot help.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::kernel::{Cell, GridMap, WorldState};
use crate::pose::Pose;
use crate::spectrum::{dominant_frequency, TRANSFORM_LEN};
use crate::synthesis::action::plan_to_goal;
use crate::synthesis::audio::{AudioEvent, Waveform};
use crate::synthesis::{HostedBackend, StubTransport};

pub const MIN_AUDIO_SAMPLES: usize = 256;
pub const TONE_TOLERANCE_HZ: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReasoningError {
    #[error("unknown query template {0:?}")]
    UnknownTemplate(String),
    #[error("map has no goal")]
    NoGoal,
    #[error("no goal reachable from the agent")]
    GoalUnreachable,
    #[error("waveform has {0} samples; at least {MIN_AUDIO_SAMPLES} required")]
    WaveformTooShort(usize),
    #[error("{0} query is missing its context")]
    MissingContext(ReasoningKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReasoningKind {
    General,
    Spatial,
    Audio,
}

impl fmt::Display for ReasoningKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReasoningKind::General => "general",
            ReasoningKind::Spatial => "spatial",
            ReasoningKind::Audio => "audio",
        })
    }
}

impl FromStr for ReasoningKind {
    type Err = ReasoningError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "general" => Ok(ReasoningKind::General),
            "spatial" => Ok(ReasoningKind::Spatial),
            "audio" => Ok(ReasoningKind::Audio),
            other => Err(ReasoningError::UnknownTemplate(other.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReasoningAnswer {
    pub text: String,
    pub structured: Option<BTreeMap<String, String>>,
}

impl ReasoningAnswer {
    fn templated(text: impl Into<String>, pairs: &[(&str, String)]) -> Self {
        Self {
            text: text.into(),
            structured: Some(pairs.iter().map(|(k, v)| (String::from(*k), v.clone())).collect()),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.structured.as_ref()?.get(key).map(String::as_str)
    }
}

/// Agent-relative direction, in tie-break priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Ahead,
    Right,
    Behind,
    Left,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Ahead => "ahead",
            Direction::Right => "right",
            Direction::Behind => "behind",
            Direction::Left => "left",
        }
    }
}

/// Classifies a world offset in the agent frame. The dominant axis wins;
/// equal magnitudes resolve ahead > right > behind > left.
pub fn direction_of(pose: Pose, offset: (i32, i32)) -> Direction {
    let (fx, fy) = pose.heading.forward();
    let (rx, ry) = pose.heading.right();
    let ahead = offset.0 * fx + offset.1 * fy;
    let right = offset.0 * rx + offset.1 * ry;
    let along = if ahead >= 0 { Direction::Ahead } else { Direction::Behind };
    let across = if right >= 0 { Direction::Right } else { Direction::Left };
    if ahead.abs() > right.abs() {
        along
    } else if right.abs() > ahead.abs() {
        across
    } else if (along as u8) <= (across as u8) {
        along
    } else {
        across
    }
}

/// Nearest goal by path distance, then Manhattan distance, then row-major.
fn nearest_goal(map: &GridMap, from: (i32, i32)) -> Option<(i32, i32)> {
    let dist = map.cell_distances(from);
    map.goals().min_by_key(|&(x, y)| {
        let d = dist[y as usize * map.width() + x as usize].unwrap_or(u32::MAX);
        let manhattan = (x - from.0).unsigned_abs() + (y - from.1).unsigned_abs();
        (d, manhattan, y, x)
    })
}

pub fn count_walls(map: &GridMap, center: (i32, i32), radius: u32) -> usize {
    let r = radius as i32;
    let mut n = 0;
    for y in center.1 - r..=center.1 + r {
        for x in center.0 - r..=center.0 + r {
            if map.cell(x, y) == Some(Cell::Wall) {
                n += 1;
            }
        }
    }
    n
}

fn parse_wall_count(text: &str) -> Option<u32> {
    let rest = text.strip_prefix("wall_count")?;
    if rest.is_empty() {
        return Some(1);
    }
    let inner = rest.strip_prefix('(')?.strip_suffix(')')?;
    let inner = inner.trim();
    let inner = inner.strip_prefix("r=").unwrap_or(inner).trim();
    inner.parse().ok()
}

pub fn infer_spatial(text: &str, state: &WorldState, map: &GridMap) -> Result<ReasoningAnswer, ReasoningError> {
    let text = text.trim();
    let pos = state.pose.cell();
    if text == "goal_direction" {
        let goal = nearest_goal(map, pos).ok_or(ReasoningError::NoGoal)?;
        let d = direction_of(state.pose, (goal.0 - pos.0, goal.1 - pos.1));
        return Ok(ReasoningAnswer::templated(d.as_str(), &[("direction", d.as_str().into())]));
    }
    if text == "distance_to_goal" {
        if map.goals().next().is_none() {
            return Err(ReasoningError::NoGoal);
        }
        let plan = plan_to_goal(map, state.pose).ok_or(ReasoningError::GoalUnreachable)?;
        let n = plan.len().to_string();
        return Ok(ReasoningAnswer::templated(n.clone(), &[("distance", n)]));
    }
    if let Some(r) = parse_wall_count(text) {
        let n = count_walls(map, pos, r).to_string();
        return Ok(ReasoningAnswer::templated(n.clone(), &[("wall_count", n), ("radius", r.to_string())]));
    }
    Err(ReasoningError::UnknownTemplate(text.into()))
}

/// Spectral peak classification into the `step` / `goal` tones.
pub fn infer_audio(waveform: &Waveform) -> Result<ReasoningAnswer, ReasoningError> {
    if waveform.samples.len() < MIN_AUDIO_SAMPLES {
        return Err(ReasoningError::WaveformTooShort(waveform.samples.len()));
    }
    let freq = dominant_frequency(&waveform.samples, waveform.sample_rate, TRANSFORM_LEN);
    let label = freq
        .and_then(|f| {
            [AudioEvent::Step, AudioEvent::Goal]
                .into_iter()
                .find(|e| (f - e.frequency()).abs() <= TONE_TOLERANCE_HZ)
        })
        .map_or("unknown", AudioEvent::as_str);
    let hz = freq.map_or_else(|| "none".into(), |f| format!("{f:.3}"));
    Ok(ReasoningAnswer::templated(label, &[("event", label.into()), ("peak_hz", hz)]))
}

/// Session facts available to general queries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionContext {
    pub state: WorldState,
    pub turn: u64,
    pub last_reward: Option<f64>,
}

fn unsupported() -> ReasoningAnswer {
    ReasoningAnswer::templated("unsupported", &[("status", "unsupported".into())])
}

/// Reasoner front-end. Untemplated general queries are forwarded to the
/// hosted backend when one is configured.
#[derive(Debug, Default)]
pub struct Reasoner {
    hosted: Option<HostedBackend<StubTransport>>,
}

impl Reasoner {
    pub fn with_hosted(hosted: HostedBackend<StubTransport>) -> Self {
        Self { hosted: Some(hosted) }
    }

    pub fn hosted(&self) -> Option<&HostedBackend<StubTransport>> {
        self.hosted.as_ref()
    }

    pub fn infer_general(&self, text: &str, ctx: Option<&SessionContext>) -> ReasoningAnswer {
        let text = text.trim();
        if let Some(ctx) = ctx {
            let p = ctx.state.pose;
            match text {
                "pose?" => {
                    return ReasoningAnswer::templated(
                        format!("at ({}, {}) facing {}", p.x, p.y, p.heading),
                        &[("x", p.x.to_string()), ("y", p.y.to_string()), ("heading", p.heading.to_string())],
                    )
                }
                "step?" => {
                    let s = ctx.state.step.to_string();
                    return ReasoningAnswer::templated(format!("step {s}"), &[("step", s)]);
                }
                "reward?" => {
                    let r = ctx.last_reward.map_or_else(|| "none".into(), |r| r.to_string());
                    return ReasoningAnswer::templated(format!("last reward {r}"), &[("reward", r)]);
                }
                _ => {}
            }
        }
        match &self.hosted {
            Some(h) => h.call(text.into()).map_or_else(|_| unsupported(), |body| ReasoningAnswer {
                text: body,
                structured: None,
            }),
            None => unsupported(),
        }
    }
}
