//! Std companion to `worldkit-core`: wire protocol, replayable session
//! logs, configuration files, the HTTP session service and CLI plumbing.

// Turn errors carry their full error envelope by design.
#![allow(clippy::result_large_err)]

pub mod config;
pub mod log;
pub mod service;
pub mod wire;
