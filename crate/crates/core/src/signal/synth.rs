use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AudioBuffer;
use crate::error::{Error, Result};

/// Peak amplitude of every synthesized utterance.
pub const UTTERANCE_PEAK: f64 = 0.9;

pub const MAX_JITTER: f64 = 0.05;

/// A harmonic source standing in for one speaker's voice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpeakerProfile {
    pub fundamental_hz: f64,
    pub harmonic_amplitudes: Vec<f64>,
    pub spectral_tilt_db_per_octave: f64,
    pub jitter_fraction: f64,
}

impl SyntheticSpeakerProfile {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if !(self.fundamental_hz > 0.0) || !self.fundamental_hz.is_finite() {
            return Err(Error::Domain(format!(
                "fundamental {} Hz must be positive",
                self.fundamental_hz
            )));
        }
        if self
            .harmonic_amplitudes
            .iter()
            .any(|a| !a.is_finite() || *a < 0.0)
        {
            return Err(Error::Domain("harmonic amplitudes must be non-negative".into()));
        }
        if !self.harmonic_amplitudes.iter().any(|&a| a > 0.0) {
            return Err(Error::Domain("at least one harmonic amplitude must be positive".into()));
        }
        if !(0.0..=MAX_JITTER).contains(&self.jitter_fraction) {
            return Err(Error::Domain(format!(
                "jitter fraction {} outside [0, {MAX_JITTER}]",
                self.jitter_fraction
            )));
        }
        if !self.spectral_tilt_db_per_octave.is_finite() {
            return Err(Error::Domain("spectral tilt must be finite".into()));
        }
        let top = self.fundamental_hz * self.harmonic_amplitudes.len() as f64;
        if top >= sample_rate as f64 / 2.0 {
            return Err(Error::Domain(format!(
                "harmonic {} at {top} Hz is at or above Nyquist",
                self.harmonic_amplitudes.len()
            )));
        }
        Ok(())
    }

    /// Harmonic amplitudes after applying the spectral tilt (octaves counted from the fundamental).
    pub fn tilted_amplitudes(&self) -> Vec<f64> {
        self.harmonic_amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let octaves = ((i + 1) as f64).log2();
                a * 10f64.powf(self.spectral_tilt_db_per_octave * octaves / 20.0)
            })
            .collect()
    }
}

fn sample_count(duration_s: f64, sample_rate: u32) -> Result<usize> {
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(Error::Domain(format!("duration {duration_s} s must be positive")));
    }
    if sample_rate == 0 {
        return Err(Error::Domain("sample rate must be positive".into()));
    }
    let n = (duration_s * sample_rate as f64).round() as usize;
    if n == 0 {
        return Err(Error::EmptyInput("duration rounds to zero samples".into()));
    }
    Ok(n)
}

/// `sin(2π·cycles)` with the integer part removed first so long signals keep full precision.
fn sin_cycles(cycles: f64) -> f64 {
    (2.0 * PI * cycles.fract()).sin()
}

pub fn synth_tone(freq_hz: f64, duration_s: f64, sample_rate: u32, amplitude: f64) -> Result<AudioBuffer> {
    let sr = sample_rate as f64;
    if !(freq_hz > 0.0) || freq_hz >= sr / 2.0 {
        return Err(Error::Domain(format!(
            "tone frequency {freq_hz} Hz must lie in (0, {}) Hz",
            sr / 2.0
        )));
    }
    if !(amplitude > 0.0 && amplitude <= 1.0) {
        return Err(Error::Domain(format!("amplitude {amplitude} outside (0, 1]")));
    }
    let n = sample_count(duration_s, sample_rate)?;
    let samples = (0..n)
        .map(|t| amplitude * sin_cycles(freq_hz * t as f64 / sr))
        .collect();
    AudioBuffer::new(samples, sample_rate)
}

/// Renders a harmonic utterance for `profile`.
///
/// Jitter is multiplicative phase noise: at the start of every fundamental
/// period a value `u ~ U[-1, 1)` is drawn from ChaCha8 seeded with `seed`, and
/// the phase advances at `f0 * (1 + jitter * u)` until the next period. The
/// result is peak-normalized to [`UTTERANCE_PEAK`].
pub fn synth_speaker_utterance(
    profile: &SyntheticSpeakerProfile,
    duration_s: f64,
    sample_rate: u32,
    seed: u64,
) -> Result<AudioBuffer> {
    profile.validate(sample_rate)?;
    let n = sample_count(duration_s, sample_rate)?;
    let sr = sample_rate as f64;
    let f0 = profile.fundamental_hz;
    let amps = profile.tilted_amplitudes();
    let jitter = profile.jitter_fraction;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || rng.gen_range(-1.0..1.0f64);
    let mut u = draw();
    let mut period = 0u64;
    // Accumulated time warp in samples; stays exactly zero without jitter.
    let mut warp = 0.0f64;

    let mut samples = Vec::with_capacity(n);
    for t in 0..n {
        let pos = t as f64 + warp;
        let cycles = f0 * pos / sr;
        let current = cycles.floor() as u64;
        if current > period {
            period = current;
            u = draw();
        }
        let value: f64 = amps
            .iter()
            .enumerate()
            .filter(|(_, a)| **a > 0.0)
            .map(|(i, a)| a * sin_cycles((i + 1) as f64 * f0 * pos / sr))
            .sum();
        samples.push(value);
        warp += jitter * u;
    }

    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak == 0.0 {
        return Err(Error::Domain("utterance is silent; duration too short".into()));
    }
    let gain = UTTERANCE_PEAK / peak;
    samples.iter_mut().for_each(|s| *s *= gain);
    AudioBuffer::new(samples, sample_rate)
}
