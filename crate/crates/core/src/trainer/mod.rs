//! Desk-scale end-to-end training of a front-end plus a small embedding backbone.
//!
//! Each step crops 2 s segments, runs front-end → [`ToyBackbone`] →
//! [`am_softmax_loss`], backpropagates into the backbone, the class weights and
//! (for the `lff` front-end) every filter center and bandwidth, applies the update
//! rule and projects the filter parameters back into their valid range.

mod backbone;
mod frontend;
mod loss;
mod model;
mod optim;
mod sampler;

pub use backbone::{BackboneCache, BackboneGrads, Dense, DenseGrads, ToyBackbone};
pub use frontend::{mix_features, mix_split, ConvBranch, Frontend, FrontendCache, FrontendGrads, FrontendKind, PreparedInput};
pub use loss::{am_softmax_loss, AmSoftmaxOutput};
pub use model::{MODEL_MAGIC, MODEL_VERSION};
pub use optim::{Optimizer, UpdateRule};
pub use sampler::{train_2s_crop_sampler, CropSampler, CROP_S};

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Embedder;
use crate::filterbank::{mel_init, project_params, FilterShape, ParamGradients};
use crate::signal::AudioBuffer;
use crate::stft::{StftConfig, StftPlan};
use crate::timedomain::TimeKernelParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub loss_scale: f64,
    pub loss_margin: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub lambda_mix: f64,
    pub update_rule: UpdateRule,
    /// Epochs (0-based) at whose start the learning rate is multiplied by `lr_decay_factor`.
    pub lr_decay_epochs: Vec<usize>,
    pub lr_decay_factor: f64,
    /// Learning-rate multiplier for the filter centers and bandwidths. They live in bin
    /// units (tens of bins) while network weights are O(0.1), so their per-step moves are
    /// scaled up to keep both groups changing at comparable relative rates.
    pub frontend_lr_scale: f64,
    pub hidden: usize,
    pub embedding_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss_scale: 30.0,
            loss_margin: 0.2,
            lr: 0.01,
            epochs: 15,
            batch: 20,
            seed: 0,
            lambda_mix: 0.0,
            update_rule: UpdateRule::default(),
            lr_decay_epochs: Vec::new(),
            lr_decay_factor: 0.1,
            frontend_lr_scale: 30.0,
            hidden: 64,
            embedding_dim: 32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.loss_scale > 0.0) {
            return Err(Error::Config(format!("loss scale {} must be positive", self.loss_scale)));
        }
        if !(0.0..1.0).contains(&self.loss_margin) {
            return Err(Error::Config(format!("loss margin {} outside [0, 1)", self.loss_margin)));
        }
        if !(self.lr > 0.0) || !(self.frontend_lr_scale >= 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.epochs == 0 || self.batch == 0 || self.hidden == 0 || self.embedding_dim == 0 {
            return Err(Error::Config("epochs, batch, hidden and embedding_dim must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.lambda_mix) {
            return Err(Error::Config(format!("lambda_mix {} outside [0, 1)", self.lambda_mix)));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        let decays = self.lr_decay_epochs.iter().filter(|&&e| e <= epoch).count();
        self.lr * self.lr_decay_factor.powi(decays as i32)
    }
}

/// How to build the front-end of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrontendSpec {
    pub kind: FrontendKind,
    pub shape: FilterShape,
    pub n_filters: usize,
    pub stft: StftConfig,
    pub kernel_len: usize,
    pub stride: usize,
    pub pool: usize,
}

impl Default for FrontendSpec {
    fn default() -> Self {
        Self {
            kind: FrontendKind::Lff,
            shape: FilterShape::Triangle,
            n_filters: 64,
            stft: StftConfig::default(),
            kernel_len: 401,
            stride: 160,
            pool: 1,
        }
    }
}

impl FrontendSpec {
    /// Defaults for a user-facing front-end name: `lff-t`, `lff-b`, `mel` (or `mel-frozen`), `sinc`, `gabor`.
    pub fn named(name: &str) -> Result<Self> {
        let (kind, shape) = match name {
            "lff-t" | "lff" => (FrontendKind::Lff, FilterShape::Triangle),
            "lff-b" => (FrontendKind::Lff, FilterShape::Bell),
            "mel" | "mel-frozen" => (FrontendKind::MelFrozen, FilterShape::Triangle),
            "sinc" => (FrontendKind::Sinc, FilterShape::Triangle),
            "gabor" => (FrontendKind::Gabor, FilterShape::Triangle),
            other => {
                return Err(Error::Config(format!(
                    "unknown front-end '{other}' (expected lff-t, lff-b, mel, sinc or gabor)"
                )))
            }
        };
        Ok(Self {
            kind,
            shape,
            ..Self::default()
        })
    }

    /// Inverse of [`FrontendSpec::named`].
    pub fn name(&self) -> &'static str {
        match (self.kind, self.shape) {
            (FrontendKind::Lff, FilterShape::Triangle) => "lff-t",
            (FrontendKind::Lff, FilterShape::Bell) => "lff-b",
            (FrontendKind::MelFrozen, _) => "mel",
            (FrontendKind::Sinc, _) => "sinc",
            (FrontendKind::Gabor, _) => "gabor",
        }
    }

    /// Mel-initialized front-end; with `lambda_mix > 0` a CNN branch takes
    /// `round(lambda * M)` of the channels (kernel and stride follow the STFT window and hop).
    pub fn build(&self, sample_rate: u32, lambda_mix: f64, rng: &mut ChaCha8Rng) -> Result<Frontend> {
        match self.kind {
            FrontendKind::Lff | FrontendKind::MelFrozen => {
                self.stft.validate()?;
                let (m1, m2) = mix_split(self.n_filters, lambda_mix)?;
                if m1 == 0 {
                    return Err(Error::Config("no channels left for the filterbank".into()));
                }
                let params = mel_init(m1, self.stft.n_bins(), sample_rate, self.shape)?;
                let cnn = (m2 > 0).then(|| {
                    ConvBranch::init(m2, self.stft.window_len_samples, self.stft.hop_samples, rng)
                });
                Ok(Frontend::Filterbank {
                    kind: self.kind,
                    stft: self.stft,
                    params,
                    cnn,
                })
            }
            FrontendKind::Sinc | FrontendKind::Gabor => {
                if lambda_mix != 0.0 {
                    return Err(Error::Config("channel mixing applies to filterbank front-ends only".into()));
                }
                let params = if self.kind == FrontendKind::Sinc {
                    TimeKernelParams::mel_sinc(self.n_filters, sample_rate, self.kernel_len, self.stride, self.pool)?
                } else {
                    TimeKernelParams::mel_gabor(self.n_filters, sample_rate, self.kernel_len, self.stride, self.pool)?
                };
                Ok(Frontend::TimeDomain {
                    kind: self.kind,
                    params,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledUtterance {
    pub audio: AudioBuffer,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub utterances: Vec<LabeledUtterance>,
}

impl Dataset {
    pub fn n_classes(&self) -> usize {
        self.utterances.iter().map(|u| u.label + 1).max().unwrap_or(0)
    }

    pub fn sample_rate(&self) -> Option<u32> {
        self.utterances.first().map(|u| u.audio.sample_rate())
    }

    /// At least two classes, each with at least two utterances, one sample rate throughout.
    pub fn validate(&self) -> Result<()> {
        let n_classes = self.n_classes();
        if n_classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, found {n_classes}")));
        }
        let mut counts = vec![0usize; n_classes];
        for u in &self.utterances {
            counts[u.label] += 1;
        }
        if let Some((c, n)) = counts.iter().enumerate().find(|(_, n)| **n < 2) {
            return Err(Error::Config(format!("class {c} has {n} utterances (need 2)")));
        }
        let sr = self.sample_rate().unwrap();
        if self.utterances.iter().any(|u| u.audio.sample_rate() != sr) {
            return Err(Error::Config("utterances use different sample rates".into()));
        }
        Ok(())
    }
}

/// Front-end, backbone and classification head.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub sample_rate: u32,
    pub frontend: Frontend,
    pub backbone: ToyBackbone,
    /// `n_classes x embedding_dim`, row-major.
    pub class_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub backbone: BackboneGrads,
    pub class_weights: Vec<f64>,
    pub filters: Option<ParamGradients>,
    pub conv: Option<Vec<f64>>,
}

impl ModelGrads {
    fn tensors(&self) -> Vec<&Vec<f64>> {
        let b = &self.backbone;
        let mut out = vec![
            &b.layer1.weights,
            &b.layer1.bias,
            &b.layer2.weights,
            &b.layer2.bias,
            &b.embedding.weights,
            &b.embedding.bias,
            &self.class_weights,
        ];
        if let Some(f) = &self.filters {
            out.push(&f.d_alpha);
            out.push(&f.d_beta);
        }
        if let Some(c) = &self.conv {
            out.push(c);
        }
        out
    }
}

impl TrainedModel {
    pub fn init(frontend: Frontend, n_classes: usize, sample_rate: u32, config: &TrainConfig, rng: &mut ChaCha8Rng) -> Self {
        let backbone = ToyBackbone::init(frontend.n_features(), config.hidden, config.embedding_dim, rng);
        let class_weights = (0..n_classes * config.embedding_dim)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        Self {
            sample_rate,
            frontend,
            backbone,
            class_weights,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.class_weights.len() / self.backbone.embedding_dim()
    }

    /// Tensors in optimizer order; filter parameters only when trainable.
    fn tensors_mut(&mut self) -> (Vec<&mut Vec<f64>>, Vec<bool>) {
        let trainable = self.frontend.filters_trainable();
        let b = &mut self.backbone;
        let mut out = vec![
            &mut b.layer1.weights,
            &mut b.layer1.bias,
            &mut b.layer2.weights,
            &mut b.layer2.bias,
            &mut b.embedding.weights,
            &mut b.embedding.bias,
            &mut self.class_weights,
        ];
        let mut is_filter = vec![false; out.len()];
        if let Frontend::Filterbank { params, cnn, .. } = &mut self.frontend {
            if trainable {
                out.push(&mut params.alphas);
                out.push(&mut params.betas);
                is_filter.extend([true, true]);
            }
            if let Some(c) = cnn {
                out.push(&mut c.kernels);
                is_filter.push(false);
            }
        }
        (out, is_filter)
    }

    fn tensor_sizes(&mut self) -> Vec<usize> {
        self.tensors_mut().0.iter().map(|t| t.len()).collect()
    }

    pub fn prepare(&self, audio: &AudioBuffer) -> Result<PreparedInput> {
        self.frontend.prepare(audio)
    }

    /// Mean AM-softmax loss over `inputs` and its gradient with respect to every trainable tensor.
    pub fn batch_loss_and_grads(
        &self,
        inputs: &[PreparedInput],
        labels: &[usize],
        scale: f64,
        margin: f64,
    ) -> Result<(f64, ModelGrads)> {
        let dim = self.backbone.embedding_dim();
        let mut embeddings = Vec::with_capacity(inputs.len() * dim);
        let mut caches = Vec::with_capacity(inputs.len());
        for input in inputs {
            let (features, fcache) = self.frontend.forward(input)?;
            let (emb, bcache) = self.backbone.forward(features.values(), features.n_frames())?;
            embeddings.extend(emb);
            caches.push((fcache, bcache));
        }
        let out = am_softmax_loss(&embeddings, &self.class_weights, labels, dim, scale, margin)?;

        let mut grads = ModelGrads {
            backbone: self.backbone.zero_grads(),
            class_weights: out.grad_class_weights,
            filters: None,
            conv: None,
        };
        for (b, (input, (fcache, bcache))) in inputs.iter().zip(&caches).enumerate() {
            let d_emb = &out.grad_embeddings[b * dim..(b + 1) * dim];
            let d_features = self.backbone.backward(bcache, d_emb, &mut grads.backbone);
            let fg = self.frontend.backward(input, fcache, &d_features)?;
            if let Some(f) = fg.filters {
                let acc = grads
                    .filters
                    .get_or_insert_with(|| ParamGradients::zeros(f.d_alpha.len()));
                acc.d_alpha.iter_mut().zip(&f.d_alpha).for_each(|(a, g)| *a += g);
                acc.d_beta.iter_mut().zip(&f.d_beta).for_each(|(a, g)| *a += g);
            }
            if let Some(c) = fg.conv {
                let acc = grads.conv.get_or_insert_with(|| vec![0.0; c.len()]);
                acc.iter_mut().zip(&c).for_each(|(a, g)| *a += g);
            }
        }
        Ok((out.loss, grads))
    }

    pub fn batch_loss(&self, inputs: &[PreparedInput], labels: &[usize], scale: f64, margin: f64) -> Result<f64> {
        let dim = self.backbone.embedding_dim();
        let mut embeddings = Vec::with_capacity(inputs.len() * dim);
        for input in inputs {
            let (features, _) = self.frontend.forward(input)?;
            embeddings.extend(self.backbone.forward(features.values(), features.n_frames())?.0);
        }
        Ok(am_softmax_loss(&embeddings, &self.class_weights, labels, dim, scale, margin)?.loss)
    }

    /// Plain gradient step `p -= lr * g` on every trainable tensor, followed by projection.
    pub fn apply_gradient_step(&mut self, grads: &ModelGrads, lr: f64) {
        let (mut params, _) = self.tensors_mut();
        for (p, g) in params.iter_mut().zip(grads.tensors()) {
            p.iter_mut().zip(g).for_each(|(p, g)| *p -= lr * g);
        }
        self.project();
    }

    fn project(&mut self) {
        if let Some(params) = self.frontend.filter_params_mut() {
            *params = project_params(params);
        }
    }
}

impl Embedder for TrainedModel {
    fn embed(&self, audio: &AudioBuffer) -> Result<Vec<f64>> {
        let input = self.prepare(audio)?;
        let (features, _) = self.frontend.forward(&input)?;
        Ok(self.backbone.forward(features.values(), features.n_frames())?.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    /// Filter parameters before the first update.
    pub initial_alphas: Vec<f64>,
    pub initial_betas: Vec<f64>,
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn initial_loss(&self) -> Option<f64> {
        self.epochs.first().map(|e| e.loss)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.loss)
    }

    /// Mean |Δβ| between initialization and the last epoch.
    pub fn mean_abs_delta_beta(&self) -> f64 {
        match self.epochs.last() {
            Some(last) if !self.initial_betas.is_empty() => {
                last.betas
                    .iter()
                    .zip(&self.initial_betas)
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
                    / self.initial_betas.len() as f64
            }
            _ => 0.0,
        }
    }

    /// `epoch,loss,alpha_0..alpha_{M-1},beta_0..beta_{M-1}`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let m = self.initial_alphas.len();
        let mut header = vec!["epoch".to_string(), "loss".to_string()];
        header.extend((0..m).map(|i| format!("alpha_{i}")));
        header.extend((0..m).map(|i| format!("beta_{i}")));
        writeln!(w, "{}", header.join(","))?;
        for e in &self.epochs {
            let mut row = vec![e.epoch.to_string(), e.loss.to_string()];
            row.extend(e.alphas.iter().chain(&e.betas).map(|v| v.to_string()));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Trains a freshly built front-end and backbone on `dataset`.
///
/// Deterministic for a fixed `config.seed`: weights come from one ChaCha8 stream,
/// epoch shuffles and crop offsets from a second. Gradients are summed over the
/// batch in index order.
pub fn train(dataset: &Dataset, spec: &FrontendSpec, config: &TrainConfig) -> Result<(TrainedModel, TrainHistory)> {
    config.validate()?;
    dataset.validate()?;
    let sample_rate = dataset.sample_rate().unwrap();
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let frontend = spec.build(sample_rate, config.lambda_mix, &mut init_rng)?;
    let mut model = TrainedModel::init(frontend, dataset.n_classes(), sample_rate, config, &mut init_rng);
    let plan = match &model.frontend {
        Frontend::Filterbank { stft, .. } => Some(StftPlan::new(*stft)?),
        Frontend::TimeDomain { .. } => None,
    };

    let snapshot = |m: &TrainedModel| {
        m.frontend
            .filter_params()
            .map(|p| (p.alphas.clone(), p.betas.clone()))
            .unwrap_or_default()
    };
    let (initial_alphas, initial_betas) = snapshot(&model);
    let mut history = TrainHistory {
        initial_alphas,
        initial_betas,
        epochs: Vec::with_capacity(config.epochs),
    };

    let sizes = model.tensor_sizes();
    let mut optimizer = Optimizer::new(config.update_rule, &sizes);
    let mut sampler = CropSampler::new(config.seed.wrapping_add(0x5EED));
    let mut order: Vec<usize> = (0..dataset.utterances.len()).collect();

    for epoch in 0..config.epochs {
        let lr = config.lr_at(epoch);
        order.shuffle(sampler.rng());
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch) {
            let mut inputs = Vec::with_capacity(chunk.len());
            let mut labels = Vec::with_capacity(chunk.len());
            for &idx in chunk {
                let utt = &dataset.utterances[idx];
                let crop = sampler.crop(&utt.audio)?;
                inputs.push(model.frontend.prepare_with(&crop, plan.as_ref())?);
                labels.push(utt.label);
            }
            let (loss, grads) = model.batch_loss_and_grads(&inputs, &labels, config.loss_scale, config.loss_margin)?;
            if !loss.is_finite() {
                return Err(Error::Invariant(format!("non-finite loss at epoch {epoch}")));
            }
            loss_sum += loss * chunk.len() as f64;

            let (mut params, is_filter) = model.tensors_mut();
            let lrs: Vec<f64> = is_filter
                .iter()
                .map(|&f| if f { lr * config.frontend_lr_scale } else { lr })
                .collect();
            optimizer.step(&mut params, &grads.tensors(), &lrs);
            model.project();
        }
        let (alphas, betas) = snapshot(&model);
        history.epochs.push(EpochRecord {
            epoch,
            loss: loss_sum / dataset.utterances.len() as f64,
            alphas,
            betas,
        });
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lr_schedule_steps() {
        let cfg = TrainConfig {
            lr: 1e-3,
            lr_decay_epochs: vec![15, 25],
            ..TrainConfig::default()
        };
        assert_eq!(cfg.lr_at(0), 1e-3);
        assert!((cfg.lr_at(15) - 1e-4).abs() < 1e-18);
        assert!((cfg.lr_at(29) - 1e-5).abs() < 1e-18);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { loss_margin: 1.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { loss_scale: 0.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { lambda_mix: 1.2, ..TrainConfig::default() }.validate().is_err());
    }

    #[test]
    fn degenerate_datasets_rejected() {
        let audio = AudioBuffer::new(vec![0.1; 40000], 16000).unwrap();
        let one_class = Dataset {
            utterances: vec![
                LabeledUtterance { audio: audio.clone(), label: 0 },
                LabeledUtterance { audio: audio.clone(), label: 0 },
            ],
        };
        assert!(matches!(one_class.validate(), Err(Error::Config(_))));
        let thin = Dataset {
            utterances: vec![
                LabeledUtterance { audio: audio.clone(), label: 0 },
                LabeledUtterance { audio: audio.clone(), label: 0 },
                LabeledUtterance { audio, label: 1 },
            ],
        };
        assert!(matches!(thin.validate(), Err(Error::Config(_))));
    }
}
