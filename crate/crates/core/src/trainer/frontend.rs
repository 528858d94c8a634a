use std::f64::consts::LN_10;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::{self, FeatureMatrix, FilterBankParams, ParamGradients, DEFAULT_EPSILON};
use crate::signal::AudioBuffer;
use crate::stft::{SpectrumMatrix, StftConfig, StftPlan};
use crate::timedomain::{self, normalize_waveform, strided_correlation, TimeKernelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrontendKind {
    #[serde(rename = "lff")]
    Lff,
    #[serde(rename = "mel-frozen")]
    MelFrozen,
    #[serde(rename = "sinc")]
    Sinc,
    #[serde(rename = "gabor")]
    Gabor,
}

impl FrontendKind {
    pub fn name(self) -> &'static str {
        match self {
            FrontendKind::Lff => "lff",
            FrontendKind::MelFrozen => "mel-frozen",
            FrontendKind::Sinc => "sinc",
            FrontendKind::Gabor => "gabor",
        }
    }

    pub fn code(self) -> u32 {
        match self {
            FrontendKind::Lff => 0,
            FrontendKind::MelFrozen => 1,
            FrontendKind::Sinc => 2,
            FrontendKind::Gabor => 3,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        [Self::Lff, Self::MelFrozen, Self::Sinc, Self::Gabor]
            .into_iter()
            .find(|k| k.code() == code)
    }
}

/// Channel split for the hybrid front-end: `(lff, cnn)` with the CNN share rounded half-up.
pub fn mix_split(n_channels: usize, lambda_mix: f64) -> Result<(usize, usize)> {
    if !(0.0..1.0).contains(&lambda_mix) {
        return Err(Error::Config(format!("lambda {lambda_mix} outside [0, 1)")));
    }
    let cnn = (lambda_mix * n_channels as f64 + 0.5).floor() as usize;
    Ok((n_channels - cnn, cnn))
}

/// Concatenates `T x M1` LFF features and `T x M2` CNN features along channels, LFF first.
pub fn mix_features(
    lff: &FeatureMatrix,
    cnn: &FeatureMatrix,
    lambda_mix: f64,
    n_channels: usize,
) -> Result<FeatureMatrix> {
    let (m1, m2) = mix_split(n_channels, lambda_mix)?;
    if lff.n_filters() != m1 || cnn.n_filters() != m2 {
        return Err(Error::Shape(format!(
            "λ = {lambda_mix}, M = {n_channels} needs {m1} LFF + {m2} CNN channels, got {} + {}",
            lff.n_filters(),
            cnn.n_filters()
        )));
    }
    if lff.n_frames() != cnn.n_frames() {
        return Err(Error::Shape(format!(
            "LFF has {} frames, CNN {}",
            lff.n_frames(),
            cnn.n_frames()
        )));
    }
    let mut values = Vec::with_capacity(lff.n_frames() * n_channels);
    for t in 0..lff.n_frames() {
        values.extend_from_slice(lff.frame(t));
        values.extend_from_slice(cnn.frame(t));
    }
    FeatureMatrix::from_values(values, lff.n_frames(), n_channels)
}

/// Single strided convolution on the normalized waveform, `10 log10(y² + eps)` per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBranch {
    pub channels: usize,
    pub kernel_len: usize,
    pub stride: usize,
    /// `channels x kernel_len`, row-major.
    pub kernels: Vec<f64>,
}

impl ConvBranch {
    pub fn init(channels: usize, kernel_len: usize, stride: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (3.0 / kernel_len as f64).sqrt();
        Self {
            channels,
            kernel_len,
            stride,
            kernels: (0..channels * kernel_len).map(|_| rng.gen_range(-limit..limit)).collect(),
        }
    }

    fn kernel(&self, c: usize) -> &[f64] {
        &self.kernels[c * self.kernel_len..(c + 1) * self.kernel_len]
    }

    /// Raw correlations (`channels x T`) and the dB features (`T x channels`).
    fn forward(&self, waveform: &[f64]) -> (Vec<Vec<f64>>, FeatureMatrix) {
        let raw: Vec<Vec<f64>> = (0..self.channels)
            .map(|c| strided_correlation(waveform, self.kernel(c), self.stride))
            .collect();
        let n_frames = raw.first().map_or(0, Vec::len);
        let mut values = vec![0.0; n_frames * self.channels];
        for (c, ys) in raw.iter().enumerate() {
            for (t, y) in ys.iter().enumerate() {
                values[t * self.channels + c] = 10.0 * (y * y + DEFAULT_EPSILON).log10();
            }
        }
        let features = FeatureMatrix::from_values(values, n_frames, self.channels)
            .expect("conv output shape");
        (raw, features)
    }

    fn backward(&self, waveform: &[f64], raw: &[Vec<f64>], d_features: &[f64], grads: &mut [f64]) {
        for (c, ys) in raw.iter().enumerate() {
            let gk = &mut grads[c * self.kernel_len..(c + 1) * self.kernel_len];
            for (t, y) in ys.iter().enumerate() {
                let g = d_features[t * self.channels + c] * 10.0 / LN_10 * 2.0 * y / (y * y + DEFAULT_EPSILON);
                let seg = &waveform[t * self.stride..t * self.stride + self.kernel_len];
                for (gk, x) in gk.iter_mut().zip(seg) {
                    *gk += g * x;
                }
            }
        }
    }
}

/// Feature extractor in front of the backbone.
#[derive(Debug, Clone, PartialEq)]
pub enum Frontend {
    /// STFT followed by a (possibly frozen) filterbank, optionally mixed with a CNN branch.
    Filterbank {
        kind: FrontendKind,
        stft: StftConfig,
        params: FilterBankParams,
        cnn: Option<ConvBranch>,
    },
    /// Fixed Sinc or Gabor convolution bank.
    TimeDomain {
        kind: FrontendKind,
        params: TimeKernelParams,
    },
}

/// Everything a front-end needs from one audio crop, computed once.
#[derive(Debug, Clone)]
pub enum PreparedInput {
    Spectral {
        spectrum: SpectrumMatrix,
        waveform: Option<Vec<f64>>,
    },
    Fixed(FeatureMatrix),
}

/// Intermediate values from [`Frontend::forward`].
#[derive(Debug, Clone, Default)]
pub struct FrontendCache {
    conv_raw: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontendGrads {
    pub filters: Option<ParamGradients>,
    pub conv: Option<Vec<f64>>,
}

impl Frontend {
    pub fn kind(&self) -> FrontendKind {
        match self {
            Frontend::Filterbank { kind, .. } | Frontend::TimeDomain { kind, .. } => *kind,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Frontend::Filterbank { params, cnn, .. } => {
                params.n_filters() + cnn.as_ref().map_or(0, |c| c.channels)
            }
            Frontend::TimeDomain { params, .. } => params.n_filters(),
        }
    }

    pub fn filter_params(&self) -> Option<&FilterBankParams> {
        match self {
            Frontend::Filterbank { params, .. } => Some(params),
            Frontend::TimeDomain { .. } => None,
        }
    }

    pub fn filter_params_mut(&mut self) -> Option<&mut FilterBankParams> {
        match self {
            Frontend::Filterbank { params, .. } => Some(params),
            Frontend::TimeDomain { .. } => None,
        }
    }

    /// Whether the filter centers and bandwidths receive gradient updates.
    pub fn filters_trainable(&self) -> bool {
        self.kind() == FrontendKind::Lff
    }

    pub fn conv_branch(&self) -> Option<&ConvBranch> {
        match self {
            Frontend::Filterbank { cnn, .. } => cnn.as_ref(),
            Frontend::TimeDomain { .. } => None,
        }
    }

    pub fn conv_branch_mut(&mut self) -> Option<&mut ConvBranch> {
        match self {
            Frontend::Filterbank { cnn, .. } => cnn.as_mut(),
            Frontend::TimeDomain { .. } => None,
        }
    }

    pub fn prepare(&self, audio: &AudioBuffer) -> Result<PreparedInput> {
        self.prepare_with(audio, None)
    }

    /// As [`Frontend::prepare`], reusing an FFT plan for the front-end's STFT configuration.
    pub fn prepare_with(&self, audio: &AudioBuffer, plan: Option<&StftPlan>) -> Result<PreparedInput> {
        match self {
            Frontend::Filterbank { stft, cnn, .. } => {
                let spectrum = match plan {
                    Some(plan) if plan.config() == stft => plan.compute(audio)?,
                    _ => StftPlan::new(*stft)?.compute(audio)?,
                };
                let waveform = cnn.as_ref().map(|_| normalize_waveform(audio.samples()));
                Ok(PreparedInput::Spectral { spectrum, waveform })
            }
            Frontend::TimeDomain { params, .. } => Ok(PreparedInput::Fixed(timedomain::frontend_forward(
                audio,
                params,
                DEFAULT_EPSILON,
            )?)),
        }
    }

    pub fn forward(&self, input: &PreparedInput) -> Result<(FeatureMatrix, FrontendCache)> {
        match (self, input) {
            (Frontend::Filterbank { params, cnn, .. }, PreparedInput::Spectral { spectrum, waveform }) => {
                let lff = filterbank::forward(spectrum, params, DEFAULT_EPSILON)?;
                match (cnn, waveform) {
                    (None, _) => Ok((lff, FrontendCache::default())),
                    (Some(branch), Some(wave)) => {
                        let (raw, conv) = branch.forward(wave);
                        let n = self.n_features();
                        let lambda = branch.channels as f64 / n as f64;
                        let mixed = mix_features(&lff, &conv, lambda, n)?;
                        Ok((mixed, FrontendCache { conv_raw: Some(raw) }))
                    }
                    (Some(_), None) => Err(Error::Invariant("hybrid front-end without waveform".into())),
                }
            }
            (Frontend::TimeDomain { .. }, PreparedInput::Fixed(features)) => {
                Ok((features.clone(), FrontendCache::default()))
            }
            _ => Err(Error::Invariant("prepared input does not match front-end".into())),
        }
    }

    /// Gradients of the trainable front-end parameters given `d loss / d features`.
    pub fn backward(&self, input: &PreparedInput, cache: &FrontendCache, d_features: &[f64]) -> Result<FrontendGrads> {
        let mut grads = FrontendGrads {
            filters: None,
            conv: None,
        };
        let (Frontend::Filterbank { params, cnn, .. }, PreparedInput::Spectral { spectrum, waveform }) = (self, input)
        else {
            return Ok(grads);
        };
        let n = self.n_features();
        let m1 = params.n_filters();
        let n_frames = spectrum.n_frames();
        if d_features.len() != n_frames * n {
            return Err(Error::Shape("feature gradient shape".into()));
        }
        if self.filters_trainable() {
            let upstream: Vec<f64> = if cnn.is_some() {
                (0..n_frames)
                    .flat_map(|t| d_features[t * n..t * n + m1].iter().copied())
                    .collect()
            } else {
                d_features.to_vec()
            };
            grads.filters = Some(filterbank::backward(spectrum, params, &upstream, DEFAULT_EPSILON)?);
        }
        if let (Some(branch), Some(wave), Some(raw)) = (cnn, waveform, &cache.conv_raw) {
            let m2 = branch.channels;
            let upstream: Vec<f64> = (0..n_frames)
                .flat_map(|t| d_features[t * n + m1..(t + 1) * n].iter().copied())
                .collect();
            let mut g = vec![0.0; branch.kernels.len()];
            debug_assert_eq!(upstream.len(), n_frames * m2);
            branch.backward(wave, raw, &upstream, &mut g);
            grads.conv = Some(g);
        }
        Ok(grads)
    }
}
