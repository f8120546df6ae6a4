//! Core of the worldkit world-model framework.
//!
//! Everything in this crate is pure computation over owned values and runs
//! without `std`; only `alloc` is required. The std companion crate
//! (`worldkit`) layers the wire protocol, session logs, the HTTP service and
//! the command-line tool on top.
//!
//! Module map:
//!
//! * [`frame`], [`pose`], [`envelope`], [`modality`]: shared value types and
//!   their portable byte encodings.
//! * [`operator`]: validates interaction signals against a template and
//!   normalizes perception input.
//! * [`kernel`]: the reference world model. Exact transition distribution,
//!   deterministic egocentric observation and reward over a stochastic
//!   gridworld.
//! * [`synthesis`]: backend contract plus reference visual, audio and action
//!   backends.
//! * [`reasoning`]: templated spatial, audio and general reasoners.
//! * [`representation`]: occupancy fusion, point export and depth raycasting.
//! * [`memory`]: session-scoped record/select/compress/manage store.
//! * [`pipeline`]: one session's orchestration of all of the above.

#![no_std]
// Turn errors carry their full error envelope by design.
#![allow(clippy::result_large_err)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod envelope;
pub mod frame;
pub mod hash;
pub mod kernel;
pub mod memory;
pub mod modality;
pub mod operator;
pub mod pipeline;
pub mod pose;
pub mod reasoning;
pub mod representation;
pub mod spectrum;
pub mod synthesis;

pub use envelope::{Artifact, ResultEnvelope, SessionId, Task};
pub use frame::{decode_frame, encode_frame, FrameError, ObservationFrame};
pub use kernel::{GridMap, KernelAction, KernelConfig, WorldState};
pub use modality::Modality;
pub use pipeline::{Pipeline, PipelineConfig, TurnInput};
pub use pose::{normalize_angles, CameraAngles, Heading, Pose};
