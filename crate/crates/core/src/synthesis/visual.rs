//! Frame prediction by rolling the reference kernel forward.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    BackendKind, RolloutStep, SynthesisArtifact, SynthesisBackend, SynthesisError, SynthesisRequest,
};
use crate::frame::encode_frame;
use crate::modality::Modality;

pub const BACKEND_ID: &str = "gridworld-frames";

/// Consumes up to `frame_budget` actions, one frame per executed step, and
/// pads with the final observation when the budget exceeds the steps
/// taken. Frames are enlarged by `resolution_scale`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GridFrameSynthesizer;

impl SynthesisBackend for GridFrameSynthesizer {
    fn id(&self) -> &str {
        BACKEND_ID
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Visual
    }

    fn predict(&self, req: &SynthesisRequest<'_>) -> Result<SynthesisArtifact, SynthesisError> {
        req.controls.validate()?;
        if req.state.terminal {
            return Err(SynthesisError::TerminalState);
        }
        let budget = req.controls.frame_budget as usize;
        let ids: Vec<usize> = req.actions.iter().take(budget).map(|a| a.id()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(req.controls.seed);
        let traj = req.kernel.rollout_with(req.state, &ids, &mut rng)?;

        let scale = req.controls.resolution_scale;
        let mut frames = Vec::with_capacity(budget);
        for step in &traj.steps {
            frames.push(step.frame.upscale(scale).map_err(|e| SynthesisError::InvalidControls(e.to_string()))?);
        }
        let tail = match traj.steps.last() {
            Some(s) => s.frame.clone(),
            None => traj.initial_frame.clone(),
        }
        .upscale(scale)
        .map_err(|e| SynthesisError::InvalidControls(e.to_string()))?;
        while frames.len() < budget {
            frames.push(tail.clone());
        }

        let mut art = SynthesisArtifact::default();
        art.metadata.insert("backend".into(), BACKEND_ID.into());
        req.controls.echo(&mut art.metadata);
        art.metadata.insert("frame_budget".into(), budget.to_string());
        art.metadata.insert("resolution_scale".into(), scale.to_string());
        art.metadata.insert("steps_executed".into(), traj.steps.len().to_string());
        for (i, s) in traj.steps.iter().enumerate() {
            art.metadata.insert(format!("reward.{i}"), s.reward.to_string());
            let p = s.state.pose;
            art.metadata.insert(format!("state.{i}"), format!("{},{},{}", p.x, p.y, p.heading));
            art.rollout.push(RolloutStep {
                action: s.action,
                state: s.state,
                reward: s.reward,
            });
        }
        art.payloads = frames
            .iter()
            .map(|f| (Modality::VideoFrames, encode_frame(f)))
            .collect();
        Ok(art)
    }
}
