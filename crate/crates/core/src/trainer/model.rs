//! Binary model files.
//!
//! All integers are `u32` and all parameters `f32`, little-endian, in this order:
//!
//! 1. magic `LFMD`, format version, sample rate, front-end kind code
//!    (0 lff, 1 mel-frozen, 2 sinc, 3 gabor)
//! 2. filterbank front-ends: window length, hop, FFT size, window code, spectrum code,
//!    filter shape code, `N`, `M1`, `alpha[M1]`, `beta[M1]`, CNN channels `M2`
//!    (0 when absent) and, if `M2 > 0`, kernel length, stride, `kernels[M2 * len]`
//! 3. time-domain front-ends: kernel length, stride, pool, `M`, then `low_hz[M]`,
//!    `band_hz[M]` (sinc) or `center_hz[M]`, `sigma_s[M]` (gabor)
//! 4. backbone: feature count, hidden width, embedding size, then weights and bias
//!    of the two hidden layers and the embedding layer (input `2 * hidden`: mean and std pooling)
//! 5. class count, class weights `[C * D]`
//!
//! Loading re-validates every parameter, so a file with `beta < 0.5` or a kernel
//! band above Nyquist is rejected rather than silently projected.

use std::path::Path;

use super::{ConvBranch, Dense, Frontend, FrontendKind, ToyBackbone, TrainedModel};
use crate::error::{Error, Result};
use crate::filterbank::{FilterBankParams, FilterShape};
use crate::stft::{SpectrumKind, StftConfig, WindowKind};
use crate::timedomain::{KernelBank, TimeKernelParams};

pub const MODEL_MAGIC: [u8; 4] = *b"LFMD";
pub const MODEL_VERSION: u32 = 1;

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }

    fn f32s(&mut self, vs: &[f64]) {
        for v in vs {
            self.0.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!("model truncated at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::Format("length overflow".into()))?)?;
        let vs: Vec<f64> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        if vs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite parameter in model".into()));
        }
        Ok(vs)
    }

    fn dense(&mut self, n_in: usize, n_out: usize) -> Result<Dense> {
        Ok(Dense {
            n_in,
            n_out,
            weights: self.f32s(n_in * n_out)?,
            bias: self.f32s(n_out)?,
        })
    }
}

fn bad_code(what: &str, code: u32) -> Error {
    Error::Format(format!("unknown {what} code {code}"))
}

impl TrainedModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.0.extend_from_slice(&MODEL_MAGIC);
        w.u32(MODEL_VERSION as usize);
        w.u32(self.sample_rate as usize);
        w.u32(self.frontend.kind().code() as usize);
        match &self.frontend {
            Frontend::Filterbank { stft, params, cnn, .. } => {
                w.u32(stft.window_len_samples);
                w.u32(stft.hop_samples);
                w.u32(stft.n_fft);
                w.u32(stft.window_kind.code() as usize);
                w.u32(stft.spectrum_kind.code() as usize);
                w.u32(params.shape.code() as usize);
                w.u32(params.n_bins);
                w.u32(params.n_filters());
                w.f32s(&params.alphas);
                w.f32s(&params.betas);
                match cnn {
                    None => w.u32(0),
                    Some(c) => {
                        w.u32(c.channels);
                        w.u32(c.kernel_len);
                        w.u32(c.stride);
                        w.f32s(&c.kernels);
                    }
                }
            }
            Frontend::TimeDomain { params, .. } => {
                w.u32(params.kernel_len);
                w.u32(params.stride);
                w.u32(params.pool);
                w.u32(params.n_filters());
                let (a, b) = match &params.bank {
                    KernelBank::Sinc { low_hz, band_hz } => (low_hz, band_hz),
                    KernelBank::Gabor { center_hz, sigma_s } => (center_hz, sigma_s),
                };
                w.f32s(a);
                w.f32s(b);
            }
        }
        let bb = &self.backbone;
        w.u32(bb.n_features());
        w.u32(bb.hidden());
        w.u32(bb.embedding_dim());
        for layer in [&bb.layer1, &bb.layer2, &bb.embedding] {
            w.f32s(&layer.weights);
            w.f32s(&layer.bias);
        }
        w.u32(self.n_classes());
        w.f32s(&self.class_weights);
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MODEL_MAGIC {
            return Err(Error::Format("not a model file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::UnsupportedFormat(format!("model format version {version}")));
        }
        let sample_rate = r.u32()?;
        if sample_rate == 0 {
            return Err(Error::Format("zero sample rate".into()));
        }
        let code = r.u32()?;
        let kind = FrontendKind::from_code(code).ok_or_else(|| bad_code("front-end", code))?;
        let frontend = match kind {
            FrontendKind::Lff | FrontendKind::MelFrozen => {
                let window_len_samples = r.usize()?;
                let hop_samples = r.usize()?;
                let n_fft = r.usize()?;
                let wc = r.u32()?;
                let sc = r.u32()?;
                let stft = StftConfig {
                    window_len_samples,
                    hop_samples,
                    n_fft,
                    window_kind: WindowKind::from_code(wc).ok_or_else(|| bad_code("window", wc))?,
                    spectrum_kind: SpectrumKind::from_code(sc).ok_or_else(|| bad_code("spectrum", sc))?,
                };
                stft.validate()?;
                let shc = r.u32()?;
                let shape = FilterShape::from_code(shc).ok_or_else(|| bad_code("filter shape", shc))?;
                let n_bins = r.usize()?;
                if n_bins != stft.n_bins() {
                    return Err(Error::Format(format!("{n_bins} bins for a {n_fft}-point FFT")));
                }
                let m1 = r.usize()?;
                let alphas = r.f32s(m1)?;
                let betas = r.f32s(m1)?;
                let params = FilterBankParams::new(shape, n_bins, alphas, betas)?;
                let m2 = r.usize()?;
                let cnn = if m2 == 0 {
                    None
                } else {
                    let kernel_len = r.usize()?;
                    let stride = r.usize()?;
                    if kernel_len == 0 || stride == 0 {
                        return Err(Error::Format("zero CNN kernel length or stride".into()));
                    }
                    Some(ConvBranch {
                        channels: m2,
                        kernel_len,
                        stride,
                        kernels: r.f32s(m2 * kernel_len)?,
                    })
                };
                Frontend::Filterbank { kind, stft, params, cnn }
            }
            FrontendKind::Sinc | FrontendKind::Gabor => {
                let kernel_len = r.usize()?;
                let stride = r.usize()?;
                let pool = r.usize()?;
                let m = r.usize()?;
                let a = r.f32s(m)?;
                let b = r.f32s(m)?;
                let bank = if kind == FrontendKind::Sinc {
                    KernelBank::Sinc { low_hz: a, band_hz: b }
                } else {
                    KernelBank::Gabor { center_hz: a, sigma_s: b }
                };
                let params = TimeKernelParams {
                    bank,
                    sample_rate,
                    kernel_len,
                    stride,
                    pool,
                };
                params.validate()?;
                Frontend::TimeDomain { kind, params }
            }
        };
        let n_features = r.usize()?;
        let hidden = r.usize()?;
        let emb = r.usize()?;
        if n_features != frontend.n_features() || hidden == 0 || emb == 0 {
            return Err(Error::Format(format!(
                "backbone expects {n_features} features, front-end produces {}",
                frontend.n_features()
            )));
        }
        let backbone = ToyBackbone {
            layer1: r.dense(n_features, hidden)?,
            layer2: r.dense(hidden, hidden)?,
            embedding: r.dense(2 * hidden, emb)?,
        };
        let n_classes = r.usize()?;
        let class_weights = r.f32s(n_classes * emb)?;
        if r.pos != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self {
            sample_rate,
            frontend,
            backbone,
            class_weights,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::trainer::{FrontendSpec, TrainConfig};

    fn model(kind: FrontendKind, lambda: f64) -> TrainedModel {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = FrontendSpec {
            kind,
            n_filters: 12,
            ..FrontendSpec::default()
        };
        let frontend = spec.build(16000, lambda, &mut rng).unwrap();
        let cfg = TrainConfig {
            hidden: 8,
            embedding_dim: 4,
            ..TrainConfig::default()
        };
        TrainedModel::init(frontend, 3, 16000, &cfg, &mut rng)
    }

    fn as_f32(v: &[f64]) -> Vec<f64> {
        v.iter().map(|x| *x as f32 as f64).collect()
    }

    #[test]
    fn round_trip_all_frontends() {
        for (kind, lambda) in [
            (FrontendKind::Lff, 0.0),
            (FrontendKind::Lff, 0.25),
            (FrontendKind::MelFrozen, 0.0),
            (FrontendKind::Sinc, 0.0),
            (FrontendKind::Gabor, 0.0),
        ] {
            let m = model(kind, lambda);
            let bytes = m.to_bytes();
            let back = TrainedModel::from_bytes(&bytes).unwrap();
            assert_eq!(back.frontend.kind(), kind);
            assert_eq!(back.n_classes(), 3);
            assert_eq!(back.class_weights, as_f32(&m.class_weights));
            assert_eq!(back.backbone.layer2.weights, as_f32(&m.backbone.layer2.weights));
            if let Some(p) = m.frontend.filter_params() {
                assert_eq!(back.frontend.filter_params().unwrap().betas, as_f32(&p.betas));
            }
            assert_eq!(back.to_bytes(), bytes);
        }
    }

    #[test]
    fn corrupt_files_rejected() {
        let bytes = model(FrontendKind::Lff, 0.0).to_bytes();
        assert!(matches!(TrainedModel::from_bytes(&bytes[..bytes.len() - 1]), Err(Error::Format(_))));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(TrainedModel::from_bytes(&extra), Err(Error::Format(_))));
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(TrainedModel::from_bytes(&magic), Err(Error::Format(_))));
        let mut version = bytes.clone();
        version[4] = 9;
        assert!(matches!(TrainedModel::from_bytes(&version), Err(Error::UnsupportedFormat(_))));
    }
}
