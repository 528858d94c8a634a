//! Framing, windowing and the short-time Fourier transform.
//!
//! Two routes compute the same spectrum: [`compute_spectrum`] windows each
//! frame and runs an FFT, while [`compute_spectrum_conv`] correlates the raw
//! signal with `n_bins` fixed complex kernels at stride `hop`, which is the
//! convolution-layer reading of the STFT.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::AudioBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hann,
    Hamming,
    Rectangular,
}

impl WindowKind {
    pub fn code(self) -> u32 {
        match self {
            WindowKind::Hann => 0,
            WindowKind::Hamming => 1,
            WindowKind::Rectangular => 2,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(WindowKind::Hann),
            1 => Some(WindowKind::Hamming),
            2 => Some(WindowKind::Rectangular),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumKind {
    Magnitude,
    Power,
}

impl SpectrumKind {
    pub fn code(self) -> u32 {
        match self {
            SpectrumKind::Magnitude => 0,
            SpectrumKind::Power => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(SpectrumKind::Magnitude),
            1 => Some(SpectrumKind::Power),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StftConfig {
    pub window_len_samples: usize,
    pub hop_samples: usize,
    pub n_fft: usize,
    pub window_kind: WindowKind,
    pub spectrum_kind: SpectrumKind,
}

impl Default for StftConfig {
    /// 25 ms / 10 ms at 16 kHz, zero-padded to 1024 points (512 retained bins).
    fn default() -> Self {
        Self {
            window_len_samples: 400,
            hop_samples: 160,
            n_fft: 1024,
            window_kind: WindowKind::Hann,
            spectrum_kind: SpectrumKind::Power,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len_samples == 0 || self.hop_samples == 0 {
            return Err(Error::Config("window length and hop must be positive".into()));
        }
        if !self.n_fft.is_power_of_two() || self.n_fft < 2 {
            return Err(Error::Config(format!("n_fft {} is not a power of two ≥ 2", self.n_fft)));
        }
        if self.window_len_samples > self.n_fft {
            return Err(Error::Config(format!(
                "window length {} exceeds n_fft {}",
                self.window_len_samples, self.n_fft
            )));
        }
        Ok(())
    }

    /// Retained one-sided bins `0..n_fft/2`; the Nyquist bin is dropped.
    pub fn n_bins(&self) -> usize {
        self.n_fft / 2
    }

    pub fn n_frames(&self, n_samples: usize) -> usize {
        if n_samples < self.window_len_samples {
            0
        } else {
            (n_samples - self.window_len_samples) / self.hop_samples + 1
        }
    }

    pub fn window(&self) -> Vec<f64> {
        window(self.window_kind, self.window_len_samples)
    }
}

/// Periodic (DFT-even) window of length `len`.
pub fn window(kind: WindowKind, len: usize) -> Vec<f64> {
    let n = len as f64;
    (0..len)
        .map(|t| {
            let c = (2.0 * PI * t as f64 / n).cos();
            match kind {
                WindowKind::Hann => 0.5 - 0.5 * c,
                WindowKind::Hamming => 0.54 - 0.46 * c,
                WindowKind::Rectangular => 1.0,
            }
        })
        .collect()
}

/// Time-by-frequency spectrum, row-major over frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumMatrix {
    values: Vec<f64>,
    n_frames: usize,
    n_bins: usize,
    config: StftConfig,
}

impl SpectrumMatrix {
    pub fn from_values(values: Vec<f64>, n_frames: usize, n_bins: usize, config: StftConfig) -> Result<Self> {
        if values.len() != n_frames * n_bins {
            return Err(Error::Shape(format!(
                "{} values for a {n_frames}x{n_bins} spectrum",
                values.len()
            )));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain("spectrum values must be finite and non-negative".into()));
        }
        Ok(Self {
            values,
            n_frames,
            n_bins,
            config,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.values[t * self.n_bins..(t + 1) * self.n_bins]
    }

    pub fn get(&self, t: usize, n: usize) -> f64 {
        self.values[t * self.n_bins + n]
    }

    /// Contiguous run of frames `start..start + len`.
    pub fn frames(&self, start: usize, len: usize) -> Result<SpectrumMatrix> {
        if start + len > self.n_frames || len == 0 {
            return Err(Error::TooShort(format!(
                "frames [{start}, {}) of {}",
                start + len,
                self.n_frames
            )));
        }
        Ok(SpectrumMatrix {
            values: self.values[start * self.n_bins..(start + len) * self.n_bins].to_vec(),
            n_frames: len,
            n_bins: self.n_bins,
            config: self.config,
        })
    }
}

/// Frames of length `window_len_samples` starting at multiples of `hop_samples`, no padding.
pub fn frame_signal<'a>(audio: &'a AudioBuffer, config: &StftConfig) -> Result<Vec<&'a [f64]>> {
    config.validate()?;
    let x = audio.samples();
    let w = config.window_len_samples;
    if x.len() < w {
        return Err(Error::TooShort(format!(
            "{} samples is shorter than one {w}-sample window",
            x.len()
        )));
    }
    Ok((0..config.n_frames(x.len()))
        .map(|j| &x[j * config.hop_samples..j * config.hop_samples + w])
        .collect())
}

fn reduce(c: Complex<f64>, kind: SpectrumKind) -> f64 {
    match kind {
        SpectrumKind::Power => c.norm_sqr(),
        SpectrumKind::Magnitude => c.norm(),
    }
}

/// Reusable FFT plan and window for one configuration.
pub struct StftPlan {
    config: StftConfig,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl StftPlan {
    pub fn new(config: StftConfig) -> Result<Self> {
        config.validate()?;
        let fft = FftPlanner::new().plan_fft_forward(config.n_fft);
        Ok(Self {
            window: config.window(),
            config,
            fft,
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn compute(&self, audio: &AudioBuffer) -> Result<SpectrumMatrix> {
        let frames = frame_signal(audio, &self.config)?;
        let n_bins = self.config.n_bins();
        let mut values = Vec::with_capacity(frames.len() * n_bins);
        let mut buf = vec![Complex::new(0.0, 0.0); self.config.n_fft];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for frame in &frames {
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for ((b, x), w) in buf.iter_mut().zip(frame.iter()).zip(&self.window) {
                b.re = x * w;
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            values.extend(buf[..n_bins].iter().map(|c| reduce(*c, self.config.spectrum_kind)));
        }
        SpectrumMatrix::from_values(values, frames.len(), n_bins, self.config)
    }
}

pub fn compute_spectrum(audio: &AudioBuffer, config: &StftConfig) -> Result<SpectrumMatrix> {
    StftPlan::new(*config)?.compute(audio)
}

/// STFT as a strided correlation with `n_bins` complex kernels `window[t]·e^{-2πikt/n_fft}`.
pub fn compute_spectrum_conv(audio: &AudioBuffer, config: &StftConfig) -> Result<SpectrumMatrix> {
    config.validate()?;
    let x = audio.samples();
    let w = config.window_len_samples;
    if x.len() < w {
        return Err(Error::TooShort(format!(
            "{} samples is shorter than one {w}-sample window",
            x.len()
        )));
    }
    let n_fft = config.n_fft;
    let n_bins = config.n_bins();
    let win = config.window();
    // Unit-circle table indexed by (k·t) mod n_fft keeps every kernel exactly periodic.
    let table: Vec<Complex<f64>> = (0..n_fft)
        .map(|m| Complex::from_polar(1.0, -2.0 * PI * m as f64 / n_fft as f64))
        .collect();
    let kernels: Vec<Vec<Complex<f64>>> = (0..n_bins)
        .map(|k| (0..w).map(|t| table[(k * t) % n_fft] * win[t]).collect())
        .collect();

    let n_frames = config.n_frames(x.len());
    let mut values = vec![0.0; n_frames * n_bins];
    for (k, kernel) in kernels.iter().enumerate() {
        for j in 0..n_frames {
            let seg = &x[j * config.hop_samples..j * config.hop_samples + w];
            let acc = seg
                .iter()
                .zip(kernel)
                .fold(Complex::new(0.0, 0.0), |acc, (s, c)| acc + c * s);
            values[j * n_bins + k] = reduce(acc, config.spectrum_kind);
        }
    }
    SpectrumMatrix::from_values(values, n_frames, n_bins, *config)
}
