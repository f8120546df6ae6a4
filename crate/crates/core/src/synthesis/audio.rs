//! Event tones and the waveform payload encoding.
//!
//! Payload: big-endian `u32` sample rate, big-endian `u32` sample count,
//! then big-endian `f32` samples.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::{BackendKind, SynthesisArtifact, SynthesisBackend, SynthesisError, SynthesisRequest};
use crate::modality::Modality;

pub const BACKEND_ID: &str = "event-tones";
pub const SAMPLE_RATE: u32 = 16_000;
pub const AMPLITUDE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub sample_rate: u32,
    pub samples: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WaveformError {
    #[error("waveform payload truncated")]
    Truncated,
    #[error("waveform declares {declared} samples but carries {actual}")]
    CountMismatch { declared: u32, actual: usize },
}

pub fn encode_waveform(w: &Waveform) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * w.samples.len());
    out.extend_from_slice(&w.sample_rate.to_be_bytes());
    out.extend_from_slice(&(w.samples.len() as u32).to_be_bytes());
    for s in &w.samples {
        out.extend_from_slice(&s.to_be_bytes());
    }
    out
}

pub fn decode_waveform(bytes: &[u8]) -> Result<Waveform, WaveformError> {
    if bytes.len() < 8 {
        return Err(WaveformError::Truncated);
    }
    let sample_rate = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let count = u32::from_be_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);
    let body = &bytes[8..];
    if !body.len().is_multiple_of(4) || body.len() / 4 != count as usize {
        return Err(WaveformError::CountMismatch {
            declared: count,
            actual: body.len() / 4,
        });
    }
    let samples = body
        .chunks_exact(4)
        .map(|c| f32::from_be_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(Waveform {
        sample_rate,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AudioEvent {
    Step,
    Goal,
}

impl AudioEvent {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "step" => Some(AudioEvent::Step),
            "goal" => Some(AudioEvent::Goal),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AudioEvent::Step => "step",
            AudioEvent::Goal => "goal",
        }
    }

    pub fn frequency(self) -> f64 {
        match self {
            AudioEvent::Step => 440.0,
            AudioEvent::Goal => 880.0,
        }
    }
}

/// Mono sine at `frequency` Hz, 16 kHz, amplitude 0.5.
pub fn sine_tone(frequency: f64, duration_s: f64) -> Result<Waveform, SynthesisError> {
    if duration_s <= 0.0 || !duration_s.is_finite() {
        return Err(SynthesisError::NonPositiveDuration);
    }
    let n = libm::round(duration_s * f64::from(SAMPLE_RATE)) as usize;
    let samples = (0..n)
        .map(|i| (AMPLITUDE * libm::sin(2.0 * PI * frequency * i as f64 / f64::from(SAMPLE_RATE))) as f32)
        .collect();
    Ok(Waveform {
        sample_rate: SAMPLE_RATE,
        samples,
    })
}

pub fn synthesize_event(event: AudioEvent, duration_s: f64) -> Result<Waveform, SynthesisError> {
    sine_tone(event.frequency(), duration_s)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ToneSynthesizer;

impl SynthesisBackend for ToneSynthesizer {
    fn id(&self) -> &str {
        BACKEND_ID
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Audio
    }

    fn predict(&self, req: &SynthesisRequest<'_>) -> Result<SynthesisArtifact, SynthesisError> {
        let text = req.input.text.as_deref().unwrap_or("");
        let event = AudioEvent::parse(text).ok_or_else(|| SynthesisError::UnknownEvent(text.into()))?;
        let wave = synthesize_event(event, req.controls.duration_s)?;
        let mut art = SynthesisArtifact::default();
        art.metadata.insert("backend".into(), BACKEND_ID.into());
        req.controls.echo(&mut art.metadata);
        art.metadata.insert("event".into(), event.as_str().into());
        art.metadata.insert("frequency_hz".into(), event.frequency().to_string());
        art.metadata.insert("sample_rate".into(), wave.sample_rate.to_string());
        art.metadata.insert("samples".into(), wave.samples.len().to_string());
        art.payloads.push((Modality::Audio, encode_waveform(&wave)));
        Ok(art)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{dominant_frequency, TRANSFORM_LEN};
    use proptest::prelude::*;

    #[test]
    fn length_and_first_sample() {
        let w = synthesize_event(AudioEvent::Goal, 0.25).unwrap();
        assert_eq!(w.samples.len(), 4000);
        assert_eq!(w.samples[0], 0.0);
        assert_eq!(synthesize_event(AudioEvent::Step, 0.0), Err(SynthesisError::NonPositiveDuration));
        assert_eq!(synthesize_event(AudioEvent::Step, -1.0), Err(SynthesisError::NonPositiveDuration));
        assert!(AudioEvent::parse("thunder").is_none());
    }

    #[test]
    fn goal_peak_near_880() {
        let w = synthesize_event(AudioEvent::Goal, 0.5).unwrap();
        let f = dominant_frequency(&w.samples, w.sample_rate, TRANSFORM_LEN).unwrap();
        let bin = f64::from(SAMPLE_RATE) / TRANSFORM_LEN as f64;
        assert!((f - 880.0).abs() <= bin, "peak at {f}");
    }

    #[test]
    fn payload_round_trip() {
        let w = synthesize_event(AudioEvent::Step, 0.01).unwrap();
        assert_eq!(decode_waveform(&encode_waveform(&w)).unwrap(), w);
        let mut bad = encode_waveform(&w);
        bad.pop();
        assert!(decode_waveform(&bad).is_err());
    }

    proptest! {
        #[test]
        fn bounded_and_exact_length(d in 0.001f64..2.0, goal in any::<bool>()) {
            let e = if goal { AudioEvent::Goal } else { AudioEvent::Step };
            let w = synthesize_event(e, d).unwrap();
            prop_assert_eq!(w.samples.len(), libm::round(d * 16_000.0) as usize);
            prop_assert!(w.samples.iter().all(|s| s.abs() <= 0.5));
        }
    }
}
