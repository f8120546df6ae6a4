//! Reference world model over a stochastic gridworld.
//!
//! [`WorldKernel`] provides the three distributions of a world model: an
//! exact state-transition distribution (movement slips to "stay" with
//! probability `p_slip`), a deterministic egocentric observation, and a
//! reward that pays `goal_reward` on entering a goal and `step_cost`
//! otherwise.

mod map;
pub mod mapgen;

pub use map::{Cell, GridMap, MapError, DEMO_MAP};

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::frame::ObservationFrame;
use crate::hash::fnv1a64;
use crate::pose::{Heading, Pose};

pub const PIXEL_WALL: u8 = 0;
pub const PIXEL_AGENT: u8 = 85;
pub const PIXEL_GOAL: u8 = 170;
pub const PIXEL_FREE: u8 = 255;

/// Actions in default-template order; the discriminant is the action id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelAction {
    MoveForward = 0,
    MoveBackward = 1,
    MoveLeft = 2,
    MoveRight = 3,
    TurnLeft = 4,
    TurnRight = 5,
}

impl KernelAction {
    pub const ALL: [KernelAction; 6] = [
        KernelAction::MoveForward,
        KernelAction::MoveBackward,
        KernelAction::MoveLeft,
        KernelAction::MoveRight,
        KernelAction::TurnLeft,
        KernelAction::TurnRight,
    ];

    pub fn from_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn token(self) -> &'static str {
        crate::operator::DEFAULT_TOKENS[self.id()]
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|a| a.token() == token)
    }

    /// Grid displacement for movement actions, `None` for turns.
    pub fn displacement(self, heading: Heading) -> Option<(i32, i32)> {
        let (fx, fy) = heading.forward();
        let (rx, ry) = heading.right();
        match self {
            KernelAction::MoveForward => Some((fx, fy)),
            KernelAction::MoveBackward => Some((-fx, -fy)),
            KernelAction::MoveLeft => Some((-rx, -ry)),
            KernelAction::MoveRight => Some((rx, ry)),
            KernelAction::TurnLeft | KernelAction::TurnRight => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KernelError {
    #[error("action id {0} is out of range")]
    ActionOutOfRange(usize),
    #[error("state is terminal")]
    Terminal,
    #[error("state ({0},{1}) is not a free cell of the map")]
    InvalidState(i32, i32),
    #[error("invalid kernel config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    pub p_slip: f64,
    pub step_cost: f64,
    pub goal_reward: f64,
    pub window_radius: u32,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            p_slip: 0.2,
            step_cost: -0.01,
            goal_reward: 1.0,
            window_radius: 2,
        }
    }
}

impl KernelConfig {
    pub fn deterministic() -> Self {
        Self {
            p_slip: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        if !(0.0..1.0).contains(&self.p_slip) {
            return Err(KernelError::InvalidConfig("p_slip must lie in [0,1)"));
        }
        if !self.step_cost.is_finite() || !self.goal_reward.is_finite() {
            return Err(KernelError::InvalidConfig("rewards must be finite"));
        }
        if self.window_radius > 64 {
            return Err(KernelError::InvalidConfig("window_radius too large"));
        }
        Ok(())
    }

    /// Side length of the observation window.
    pub fn window_size(&self) -> u32 {
        2 * self.window_radius + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub pose: Pose,
    pub step: u64,
    pub terminal: bool,
}

impl WorldState {
    pub fn at(x: i32, y: i32, heading: Heading) -> Self {
        Self {
            pose: Pose::new(x, y, heading),
            step: 0,
            terminal: false,
        }
    }
}

/// Exact successor distribution. Probabilities are positive and sum to one;
/// states are distinct.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDist {
    pub outcomes: Vec<(WorldState, f64)>,
}

impl TransitionDist {
    pub fn total(&self) -> f64 {
        self.outcomes.iter().map(|(_, p)| p).sum()
    }

    pub fn probability_of(&self, state: &WorldState) -> f64 {
        self.outcomes
            .iter()
            .filter(|(s, _)| s == state)
            .map(|(_, p)| p)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub action: KernelAction,
    pub state: WorldState,
    pub frame: ObservationFrame,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial_frame: ObservationFrame,
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn cumulative_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn final_state(&self) -> Option<&WorldState> {
        self.steps.last().map(|s| &s.state)
    }
}

/// Uniform draw in [0,1) from the top 53 bits of one `u64`.
pub fn unit_draw<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Stable 64-bit digest over a frame's pixels.
pub fn frame_digest(frame: &ObservationFrame) -> u64 {
    fnv1a64(frame.pixels())
}

/// Deterministic (slip-free) successor pose. Blocked moves stay put.
pub fn intended_pose(map: &GridMap, pose: Pose, action: KernelAction) -> Pose {
    match action.displacement(pose.heading) {
        None => {
            let heading = if action == KernelAction::TurnLeft {
                pose.heading.counter_clockwise()
            } else {
                pose.heading.clockwise()
            };
            Pose { heading, ..pose }
        }
        Some((dx, dy)) => {
            let (x, y) = (pose.x + dx, pose.y + dy);
            if map.blocked(x, y) {
                pose
            } else {
                Pose { x, y, ..pose }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldKernel {
    map: GridMap,
    config: KernelConfig,
}

impl WorldKernel {
    pub fn new(map: GridMap, config: KernelConfig) -> Result<Self, KernelError> {
        config.validate()?;
        Ok(Self { map, config })
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    /// Start cell, heading east, step 0.
    pub fn initial_state(&self) -> WorldState {
        let (x, y) = self.map.start();
        WorldState::at(x, y, Heading::E)
    }

    fn check_state(&self, s: &WorldState) -> Result<(), KernelError> {
        if self.map.blocked(s.pose.x, s.pose.y) {
            return Err(KernelError::InvalidState(s.pose.x, s.pose.y));
        }
        Ok(())
    }

    fn successor(&self, s: &WorldState, pose: Pose) -> WorldState {
        WorldState {
            pose,
            step: s.step + 1,
            terminal: self.map.cell(pose.x, pose.y) == Some(Cell::Goal),
        }
    }

    pub fn transition_distribution(
        &self,
        s: &WorldState,
        action_id: usize,
    ) -> Result<TransitionDist, KernelError> {
        let action = KernelAction::from_id(action_id).ok_or(KernelError::ActionOutOfRange(action_id))?;
        if s.terminal {
            return Err(KernelError::Terminal);
        }
        self.check_state(s)?;
        let stay = self.successor(s, s.pose);
        let next = intended_pose(&self.map, s.pose, action);
        let outcomes = if next == s.pose {
            vec![(stay, 1.0)]
        } else if action.displacement(s.pose.heading).is_none() || self.config.p_slip == 0.0 {
            vec![(self.successor(s, next), 1.0)]
        } else {
            vec![
                (self.successor(s, next), 1.0 - self.config.p_slip),
                (stay, self.config.p_slip),
            ]
        };
        Ok(TransitionDist { outcomes })
    }

    /// One uniform draw against the cumulative outcome probabilities.
    pub fn sample_transition<R: RngCore + ?Sized>(
        &self,
        s: &WorldState,
        action_id: usize,
        rng: &mut R,
    ) -> Result<WorldState, KernelError> {
        let dist = self.transition_distribution(s, action_id)?;
        let u = unit_draw(rng);
        let mut acc = 0.0;
        for (state, p) in &dist.outcomes {
            acc += p;
            if u < acc {
                return Ok(*state);
            }
        }
        Ok(dist.outcomes[dist.outcomes.len() - 1].0)
    }

    /// Egocentric (2r+1)x(2r+1) window with the heading pointing up.
    pub fn observe(&self, s: &WorldState) -> ObservationFrame {
        let r = self.config.window_radius as i32;
        let n = 2 * r + 1;
        let (fx, fy) = s.pose.heading.forward();
        let (rx, ry) = s.pose.heading.right();
        let mut pixels = Vec::with_capacity((n * n) as usize);
        for j in 0..n {
            for i in 0..n {
                let (right, ahead) = (i - r, r - j);
                let wx = s.pose.x + right * rx + ahead * fx;
                let wy = s.pose.y + right * ry + ahead * fy;
                let px = match self.map.cell(wx, wy) {
                    None | Some(Cell::Wall) => PIXEL_WALL,
                    Some(Cell::Free) => PIXEL_FREE,
                    Some(Cell::Goal) => PIXEL_GOAL,
                };
                pixels.push(px);
            }
        }
        pixels[(r * n + r) as usize] = PIXEL_AGENT;
        ObservationFrame::new(n as u32, n as u32, pixels).expect("window dimensions are consistent")
    }

    pub fn reward(&self, s: &WorldState, _action_id: usize, next: &WorldState) -> f64 {
        if next.terminal && !s.terminal {
            self.config.goal_reward
        } else {
            self.config.step_cost
        }
    }

    /// Applies `actions` in order with a generator seeded from `seed`,
    /// stopping after the first terminal state.
    pub fn rollout(
        &self,
        s0: &WorldState,
        actions: &[usize],
        seed: u64,
    ) -> Result<Trajectory, KernelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.rollout_with(s0, actions, &mut rng)
    }

    pub fn rollout_with<R: RngCore + ?Sized>(
        &self,
        s0: &WorldState,
        actions: &[usize],
        rng: &mut R,
    ) -> Result<Trajectory, KernelError> {
        self.check_state(s0)?;
        let mut trajectory = Trajectory {
            initial_frame: self.observe(s0),
            steps: Vec::with_capacity(actions.len()),
        };
        let mut state = *s0;
        for &a in actions {
            if state.terminal {
                break;
            }
            let action = KernelAction::from_id(a).ok_or(KernelError::ActionOutOfRange(a))?;
            let next = self.sample_transition(&state, a, rng)?;
            let reward = self.reward(&state, a, &next);
            trajectory.steps.push(TrajectoryStep {
                action,
                state: next,
                frame: self.observe(&next),
                reward,
            });
            state = next;
        }
        Ok(trajectory)
    }
}

#[cfg(test)]
mod tests;
