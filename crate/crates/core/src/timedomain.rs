//! Sinc and Gabor convolution front-ends on the raw waveform.
//!
//! Both banks use fixed, Mel-spaced initializations. The waveform is mean/variance
//! normalized, correlated with each kernel at `stride`, rectified (|y| for sinc,
//! `y_cos² + y_sin²` for the Gabor quadrature pair), max-pooled over `pool`
//! consecutive outputs and converted to dB.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::{hz_to_mel, mel_to_hz, FeatureMatrix};
use crate::signal::AudioBuffer;

/// Lowest band edge used by the Mel-spaced initializations.
pub const MIN_EDGE_HZ: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelBank {
    Sinc { low_hz: Vec<f64>, band_hz: Vec<f64> },
    Gabor { center_hz: Vec<f64>, sigma_s: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeKernelParams {
    #[serde(flatten)]
    pub bank: KernelBank,
    pub sample_rate: u32,
    pub kernel_len: usize,
    pub stride: usize,
    pub pool: usize,
}

impl TimeKernelParams {
    /// SincNet-style bank: `M` adjacent bands between Mel-equispaced edges.
    pub fn mel_sinc(n_filters: usize, sample_rate: u32, kernel_len: usize, stride: usize, pool: usize) -> Result<Self> {
        let edges = mel_edges_hz(n_filters + 1, sample_rate)?;
        let params = Self {
            bank: KernelBank::Sinc {
                low_hz: edges[..n_filters].to_vec(),
                band_hz: edges.windows(2).map(|w| w[1] - w[0]).collect(),
            },
            sample_rate,
            kernel_len,
            stride,
            pool,
        };
        params.validate()?;
        Ok(params)
    }

    /// Gabor bank centered on Mel-equispaced points; the spectral standard deviation is a
    /// quarter of the span between neighbouring points, i.e. `sigma_t = 1 / (2π sigma_f)`.
    pub fn mel_gabor(n_filters: usize, sample_rate: u32, kernel_len: usize, stride: usize, pool: usize) -> Result<Self> {
        let edges = mel_edges_hz(n_filters + 2, sample_rate)?;
        let center_hz = edges[1..=n_filters].to_vec();
        let sigma_s = edges
            .windows(3)
            .map(|w| 1.0 / (2.0 * PI * (w[2] - w[0]) / 4.0))
            .collect();
        let params = Self {
            bank: KernelBank::Gabor { center_hz, sigma_s },
            sample_rate,
            kernel_len,
            stride,
            pool,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn n_filters(&self) -> usize {
        match &self.bank {
            KernelBank::Sinc { low_hz, .. } => low_hz.len(),
            KernelBank::Gabor { center_hz, .. } => center_hz.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_len == 0 || self.kernel_len % 2 == 0 {
            return Err(Error::Config(format!("kernel length {} must be odd", self.kernel_len)));
        }
        if self.stride == 0 || self.pool == 0 {
            return Err(Error::Config("stride and pool must be positive".into()));
        }
        if self.sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        match &self.bank {
            KernelBank::Sinc { low_hz, band_hz } => {
                if low_hz.len() != band_hz.len() || low_hz.is_empty() {
                    return Err(Error::Shape("sinc bank needs matching, non-empty low/band lists".into()));
                }
                for (lo, bw) in low_hz.iter().zip(band_hz) {
                    check_band(*lo, lo + bw, nyquist)?;
                }
            }
            KernelBank::Gabor { center_hz, sigma_s } => {
                if center_hz.len() != sigma_s.len() || center_hz.is_empty() {
                    return Err(Error::Shape("gabor bank needs matching, non-empty center/sigma lists".into()));
                }
                for (c, s) in center_hz.iter().zip(sigma_s) {
                    check_gabor(*c, *s, nyquist)?;
                }
            }
        }
        Ok(())
    }

    /// Output frames for `n_samples` of input: `floor((L - K) / stride + 1) / pool`.
    pub fn n_frames(&self, n_samples: usize) -> usize {
        conv_positions(n_samples, self.kernel_len, self.stride) / self.pool
    }

    /// Exact multiply-accumulate count of the convolution stage (the Gabor pair counts twice).
    pub fn conv_macs(&self, n_samples: usize) -> u64 {
        let per_filter = match self.bank {
            KernelBank::Sinc { .. } => 1,
            KernelBank::Gabor { .. } => 2,
        };
        per_filter
            * self.n_filters() as u64
            * self.kernel_len as u64
            * conv_positions(n_samples, self.kernel_len, self.stride) as u64
    }
}

fn mel_edges_hz(count: usize, sample_rate: u32) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::Config("need at least one filter".into()));
    }
    // Keep the top edge a little below Nyquist so every band stays strictly inside it.
    let top_hz = sample_rate as f64 / 2.0 * 0.98;
    if top_hz <= MIN_EDGE_HZ {
        return Err(Error::Config(format!("sample rate {sample_rate} too low")));
    }
    let (lo, hi) = (hz_to_mel(MIN_EDGE_HZ), hz_to_mel(top_hz));
    Ok((0..count)
        .map(|k| mel_to_hz(lo + (hi - lo) * k as f64 / (count - 1) as f64))
        .collect())
}

fn check_band(low_hz: f64, high_hz: f64, nyquist: f64) -> Result<()> {
    if !(low_hz > 0.0 && low_hz < high_hz && high_hz < nyquist) {
        return Err(Error::Domain(format!(
            "sinc band [{low_hz}, {high_hz}] Hz must satisfy 0 < low < high < {nyquist}"
        )));
    }
    Ok(())
}

fn check_gabor(center_hz: f64, sigma_s: f64, nyquist: f64) -> Result<()> {
    if !(center_hz > 0.0 && center_hz < nyquist) {
        return Err(Error::Domain(format!("gabor center {center_hz} Hz outside (0, {nyquist})")));
    }
    if !(sigma_s > 0.0) || !sigma_s.is_finite() {
        return Err(Error::Domain(format!("gabor sigma {sigma_s} s must be positive")));
    }
    Ok(())
}

fn conv_positions(n_samples: usize, kernel_len: usize, stride: usize) -> usize {
    if n_samples < kernel_len {
        0
    } else {
        (n_samples - kernel_len) / stride + 1
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Offsets of each tap from the center tap, in samples. Exactly antisymmetric.
fn tap_offsets(kernel_len: usize) -> impl Iterator<Item = f64> {
    let half = (kernel_len / 2) as i64;
    (0..kernel_len as i64).map(move |t| (t - half) as f64)
}

fn check_kernel_len(kernel_len: usize) -> Result<()> {
    if kernel_len == 0 || kernel_len % 2 == 0 {
        return Err(Error::Config(format!("kernel length {kernel_len} must be odd")));
    }
    Ok(())
}

/// Hamming-windowed band-pass sinc in normalized-frequency form; the center tap is
/// `2 (high - low) / sample_rate`.
pub fn make_sinc_kernel(low_hz: f64, high_hz: f64, kernel_len: usize, sample_rate: u32) -> Result<Vec<f64>> {
    check_kernel_len(kernel_len)?;
    let sr = sample_rate as f64;
    check_band(low_hz, high_hz, sr / 2.0)?;
    let (f1, f2) = (low_hz / sr, high_hz / sr);
    let span = (kernel_len - 1) as f64;
    Ok(tap_offsets(kernel_len)
        .map(|tau| {
            // Symmetric Hamming, written in terms of |tau| so mirrored taps match bit for bit.
            let window = 0.54 + 0.46 * (2.0 * PI * tau.abs() / span).cos();
            let tau = tau.abs();
            (2.0 * f2 * sinc(2.0 * f2 * tau) - 2.0 * f1 * sinc(2.0 * f1 * tau)) * window
        })
        .collect())
}

/// Cosine Gabor kernel `exp(-t²/2σ²) cos(2π f t)`, unit peak at the center tap.
pub fn make_gabor_kernel(center_hz: f64, sigma_s: f64, kernel_len: usize, sample_rate: u32) -> Result<Vec<f64>> {
    Ok(make_gabor_pair(center_hz, sigma_s, kernel_len, sample_rate)?.0)
}

/// Cosine (even) and sine (odd) Gabor kernels forming a quadrature pair.
pub fn make_gabor_pair(
    center_hz: f64,
    sigma_s: f64,
    kernel_len: usize,
    sample_rate: u32,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_kernel_len(kernel_len)?;
    let sr = sample_rate as f64;
    check_gabor(center_hz, sigma_s, sr / 2.0)?;
    let (cos_k, sin_k) = tap_offsets(kernel_len)
        .map(|tau| {
            let t = tau.abs() / sr;
            let envelope = (-(t * t) / (2.0 * sigma_s * sigma_s)).exp();
            let phase = 2.0 * PI * center_hz * t;
            (envelope * phase.cos(), tau.signum() * envelope * phase.sin())
        })
        .unzip();
    Ok((cos_k, sin_k))
}

/// Zero-mean, unit-variance copy of the waveform (all zeros when the input is constant).
pub fn normalize_waveform(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-12 {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - mean) / std).collect()
}

/// Dot product with eight fixed accumulator lanes, so it vectorizes while the
/// summation order stays the same on every run.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut lanes = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            lanes[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    lanes.iter().sum::<f64>() + tail
}

/// Correlation of `x` with `kernel` at every `stride`-th position.
pub fn strided_correlation(x: &[f64], kernel: &[f64], stride: usize) -> Vec<f64> {
    let n = conv_positions(x.len(), kernel.len(), stride);
    (0..n)
        .map(|j| dot(&x[j * stride..j * stride + kernel.len()], kernel))
        .collect()
}

pub fn frontend_forward(audio: &AudioBuffer, params: &TimeKernelParams, epsilon: f64) -> Result<FeatureMatrix> {
    params.validate()?;
    if audio.sample_rate() != params.sample_rate {
        return Err(Error::Config(format!(
            "audio at {} Hz, kernels designed for {} Hz",
            audio.sample_rate(),
            params.sample_rate
        )));
    }
    let n_frames = params.n_frames(audio.len());
    if n_frames == 0 {
        return Err(Error::TooShort(format!(
            "{} samples cannot fill {} pooled outputs of a {}-tap kernel",
            audio.len(),
            params.pool,
            params.kernel_len
        )));
    }
    let x = normalize_waveform(audio.samples());
    let m = params.n_filters();
    let responses: Vec<Vec<f64>> = match &params.bank {
        KernelBank::Sinc { low_hz, band_hz } => low_hz
            .iter()
            .zip(band_hz)
            .map(|(lo, bw)| {
                let k = make_sinc_kernel(*lo, lo + bw, params.kernel_len, params.sample_rate)?;
                Ok(strided_correlation(&x, &k, params.stride)
                    .into_iter()
                    .map(f64::abs)
                    .collect())
            })
            .collect::<Result<_>>()?,
        KernelBank::Gabor { center_hz, sigma_s } => center_hz
            .iter()
            .zip(sigma_s)
            .map(|(c, s)| {
                let (kc, ks) = make_gabor_pair(*c, *s, params.kernel_len, params.sample_rate)?;
                let yc = strided_correlation(&x, &kc, params.stride);
                let ys = strided_correlation(&x, &ks, params.stride);
                Ok(yc.iter().zip(&ys).map(|(a, b)| a * a + b * b).collect())
            })
            .collect::<Result<_>>()?,
    };

    let mut values = vec![0.0; n_frames * m];
    for (i, resp) in responses.iter().enumerate() {
        for t in 0..n_frames {
            let pooled = resp[t * params.pool..(t + 1) * params.pool]
                .iter()
                .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            values[t * m + i] = 10.0 * (pooled + epsilon).log10();
        }
    }
    FeatureMatrix::from_values(values, n_frames, m)
}

/// Share of a kernel's L2 energy that falls in its central `len / 4` taps.
pub fn central_quarter_energy_fraction(kernel: &[f64]) -> f64 {
    let quarter = kernel.len() / 4;
    let start = (kernel.len() - quarter) / 2;
    let total: f64 = kernel.iter().map(|v| v * v).sum();
    let central: f64 = kernel[start..start + quarter].iter().map(|v| v * v).sum();
    central / total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingReport {
    pub low_hz: f64,
    pub high_hz: f64,
    pub fraction_of_energy_in_central_quarter: f64,
}

/// Energy concentration of a band-pass sinc of width `band_hz` centered at `sample_rate / 4`.
///
/// Wider bands give narrower kernels, so a coarse stride skips most of the
/// samples that a wide-band kernel actually weighs.
pub fn demonstrate_scaling_tradeoff(band_hz: f64, kernel_len: usize, sample_rate: u32) -> Result<ScalingReport> {
    let nyquist = sample_rate as f64 / 2.0;
    if !(band_hz > 0.0 && band_hz < nyquist) {
        return Err(Error::Domain(format!("bandwidth {band_hz} Hz must lie in (0, {nyquist})")));
    }
    let center = sample_rate as f64 / 4.0;
    let (low_hz, high_hz) = (center - band_hz / 2.0, center + band_hz / 2.0);
    let kernel = make_sinc_kernel(low_hz, high_hz, kernel_len, sample_rate)?;
    Ok(ScalingReport {
        low_hz,
        high_hz,
        fraction_of_energy_in_central_quarter: central_quarter_energy_fraction(&kernel),
    })
}
