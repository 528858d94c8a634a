//! Audio ingestion and deterministic test-signal synthesis.

mod synth;
mod wav;

pub use synth::{synth_speaker_utterance, synth_tone, SyntheticSpeakerProfile, MAX_JITTER, UTTERANCE_PEAK};
pub use wav::{load_wav, parse_wav};

use crate::error::{Error, Result};

/// Tolerance on the unit-amplitude bound.
pub const AMPLITUDE_SLACK: f64 = 1e-6;

/// Mono PCM samples in `[-1, 1]` at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Domain("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::EmptyInput("audio buffer has no samples".into()));
        }
        if let Some(bad) = samples
            .iter()
            .find(|s| !s.is_finite() || s.abs() > 1.0 + AMPLITUDE_SLACK)
        {
            return Err(Error::Domain(format!("sample {bad} outside [-1, 1]")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Copy of `len` samples starting at `offset`.
    pub fn slice(&self, offset: usize, len: usize) -> Result<AudioBuffer> {
        if len == 0 || offset + len > self.samples.len() {
            return Err(Error::TooShort(format!(
                "segment [{offset}, {}) exceeds buffer of {} samples",
                offset + len,
                self.samples.len()
            )));
        }
        Ok(AudioBuffer {
            samples: self.samples[offset..offset + len].to_vec(),
            sample_rate: self.sample_rate,
        })
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}
