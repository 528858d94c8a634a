//! Desk-scale speaker-verification experiment on synthetic speakers.
//!
//! Every speaker is a [`SyntheticSpeakerProfile`]; each utterance additionally draws a
//! small fundamental shift and additive noise so that no two recordings are identical.
//! Training utterances and held-out utterances are generated from disjoint seeds.
//! Every unordered pair of held-out utterances forms one trial.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{compute_eer, score_segments, segment_embeddings, ScoreSet, SEGMENT_S};
use crate::signal::{synth_speaker_utterance, AudioBuffer, SyntheticSpeakerProfile, UTTERANCE_PEAK};
use crate::trainer::{train, Dataset, FrontendSpec, LabeledUtterance, TrainConfig, TrainHistory, TrainedModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSetSpec {
    pub n_speakers: usize,
    pub utterances_per_speaker: usize,
    pub utterance_s: f64,
    pub heldout_per_speaker: usize,
    pub heldout_s: f64,
    pub sample_rate: u32,
    pub n_harmonics: usize,
    pub f0_range_hz: [f64; 2],
    pub tilt_range_db: [f64; 2],
    pub jitter: f64,
    /// Per-utterance relative shift of the fundamental, drawn uniformly in `±f0_spread`.
    pub f0_spread: f64,
    /// RMS of the uniform white noise added before peak normalization.
    pub noise_rms: f64,
    /// Explicit profiles; when present they replace the random ones and set the speaker count.
    pub speakers: Option<Vec<SyntheticSpeakerProfile>>,
}

impl Default for SyntheticSetSpec {
    fn default() -> Self {
        Self {
            n_speakers: 10,
            utterances_per_speaker: 20,
            utterance_s: 3.0,
            heldout_per_speaker: 4,
            heldout_s: 4.0,
            sample_rate: 16000,
            n_harmonics: 12,
            f0_range_hz: [90.0, 240.0],
            tilt_range_db: [-9.0, -3.0],
            jitter: 0.01,
            f0_spread: 0.03,
            noise_rms: 0.02,
            speakers: None,
        }
    }
}

/// Labeled train split plus held-out utterances.
#[derive(Debug, Clone)]
pub struct SyntheticSet {
    pub profiles: Vec<SyntheticSpeakerProfile>,
    pub train: Dataset,
    pub heldout: Vec<LabeledUtterance>,
}

impl SyntheticSetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.utterances_per_speaker < 2 || self.heldout_per_speaker < 1 {
            return Err(Error::Config("need ≥ 2 training and ≥ 1 held-out utterance per speaker".into()));
        }
        if self.heldout_s < SEGMENT_S {
            return Err(Error::Config(format!("held-out utterances must last at least {SEGMENT_S} s")));
        }
        if !(self.utterance_s > 0.0) || self.sample_rate == 0 {
            return Err(Error::Config("utterance length and sample rate must be positive".into()));
        }
        if !(0.0..0.5).contains(&self.f0_spread) || !(self.noise_rms >= 0.0) {
            return Err(Error::Config("f0_spread must lie in [0, 0.5) and noise_rms be non-negative".into()));
        }
        let [lo, hi] = self.f0_range_hz;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::Config(format!("bad fundamental range [{lo}, {hi}]")));
        }
        Ok(())
    }

    fn random_profiles(&self, rng: &mut ChaCha8Rng) -> Vec<SyntheticSpeakerProfile> {
        let [f_lo, f_hi] = self.f0_range_hz;
        let [t_lo, t_hi] = self.tilt_range_db;
        (0..self.n_speakers)
            .map(|_| SyntheticSpeakerProfile {
                fundamental_hz: f_lo + (f_hi - f_lo) * rng.gen::<f64>(),
                harmonic_amplitudes: (0..self.n_harmonics).map(|_| rng.gen_range(0.2..1.0)).collect(),
                spectral_tilt_db_per_octave: t_lo + (t_hi - t_lo) * rng.gen::<f64>(),
                jitter_fraction: self.jitter,
            })
            .collect()
    }

    fn utterance(&self, profile: &SyntheticSpeakerProfile, duration_s: f64, rng: &mut ChaCha8Rng) -> Result<AudioBuffer> {
        let shift = 1.0 + self.f0_spread * rng.gen_range(-1.0..1.0);
        let shifted = SyntheticSpeakerProfile {
            fundamental_hz: profile.fundamental_hz * shift,
            ..profile.clone()
        };
        let clean = synth_speaker_utterance(&shifted, duration_s, self.sample_rate, rng.gen())?;
        let half_width = self.noise_rms * 3f64.sqrt();
        let mut samples = clean.into_samples();
        if half_width > 0.0 {
            for s in samples.iter_mut() {
                *s += rng.gen_range(-half_width..half_width);
            }
        }
        let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        if peak > 0.0 {
            samples.iter_mut().for_each(|s| *s *= UTTERANCE_PEAK / peak);
        }
        AudioBuffer::new(samples, self.sample_rate)
    }

    pub fn generate(&self, seed: u64) -> Result<SyntheticSet> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let profiles = match &self.speakers {
            Some(p) => p.clone(),
            None => self.random_profiles(&mut rng),
        };
        if profiles.len() < 2 {
            return Err(Error::Config(format!("need at least 2 speakers, got {}", profiles.len())));
        }
        for p in &profiles {
            p.validate(self.sample_rate).map_err(|e| Error::Config(e.to_string()))?;
        }
        let mut train_rng = ChaCha8Rng::seed_from_u64(rng.gen());
        let mut heldout_rng = ChaCha8Rng::seed_from_u64(rng.gen());
        let mut train = Dataset::default();
        let mut heldout = Vec::new();
        for (label, profile) in profiles.iter().enumerate() {
            for _ in 0..self.utterances_per_speaker {
                let audio = self.utterance(profile, self.utterance_s, &mut train_rng)?;
                train.utterances.push(LabeledUtterance { audio, label });
            }
            for _ in 0..self.heldout_per_speaker {
                let audio = self.utterance(profile, self.heldout_s, &mut heldout_rng)?;
                heldout.push(LabeledUtterance { audio, label });
            }
        }
        Ok(SyntheticSet {
            profiles,
            train,
            heldout,
        })
    }
}

/// One front-end to train, by user-facing name (`lff-t`, `lff-b`, `mel`, `sinc`, `gabor`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyFrontend {
    pub name: String,
    #[serde(default)]
    pub n_filters: Option<usize>,
    /// Overrides the training config's `lambda_mix` for this run.
    #[serde(default)]
    pub lambda_mix: Option<f64>,
}

impl ToyFrontend {
    pub fn spec(&self) -> Result<FrontendSpec> {
        let mut spec = FrontendSpec::named(&self.name)?;
        if let Some(m) = self.n_filters {
            spec.n_filters = m;
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToySpec {
    /// Seeds the data generation and, overriding `train.seed`, every training run.
    pub seed: u64,
    pub data: SyntheticSetSpec,
    pub frontends: Vec<ToyFrontend>,
    pub train: TrainConfig,
}

impl Default for ToySpec {
    fn default() -> Self {
        Self {
            seed: 0,
            data: SyntheticSetSpec::default(),
            frontends: vec![
                ToyFrontend {
                    name: "mel".into(),
                    n_filters: None,
                    lambda_mix: None,
                },
                ToyFrontend {
                    name: "lff-t".into(),
                    n_filters: None,
                    lambda_mix: None,
                },
            ],
            train: TrainConfig::default(),
        }
    }
}

/// Per-front-end entry of the metrics JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontendMetrics {
    pub name: String,
    pub n_filters: usize,
    pub lambda_mix: f64,
    pub epochs: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub eer: f64,
    pub eer_threshold: f64,
    /// Mean |Δα| and |Δβ| in bins between initialization and the end of training; null for time-domain front-ends.
    pub mean_abs_delta_alpha: Option<f64>,
    pub mean_abs_delta_beta: Option<f64>,
}

/// Metrics JSON written by the `toy` command. Keys are stable; floats are full precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyMetrics {
    pub config_hash: String,
    pub seed: u64,
    pub n_speakers: usize,
    pub n_train_utterances: usize,
    pub n_heldout_utterances: usize,
    pub n_target_trials: usize,
    pub n_nontarget_trials: usize,
    pub frontends: Vec<FrontendMetrics>,
}

#[derive(Debug, Clone)]
pub struct ToyRun {
    pub name: String,
    pub model: TrainedModel,
    pub history: TrainHistory,
}

#[derive(Debug, Clone)]
pub struct ToyOutcome {
    pub metrics: ToyMetrics,
    pub runs: Vec<ToyRun>,
}

/// Scores every unordered pair of held-out utterances with `model`.
pub fn score_heldout(model: &TrainedModel, heldout: &[LabeledUtterance]) -> Result<ScoreSet> {
    let embeddings = heldout
        .iter()
        .map(|u| segment_embeddings(&u.audio, model))
        .collect::<Result<Vec<_>>>()?;
    let mut scores = ScoreSet::default();
    for i in 0..heldout.len() {
        for j in i + 1..heldout.len() {
            scores.push(
                score_segments(&embeddings[i], &embeddings[j]),
                heldout[i].label == heldout[j].label,
            );
        }
    }
    Ok(scores)
}

fn mean_abs_delta(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

pub fn run_toy_experiment(spec: &ToySpec, config_hash: &str) -> Result<ToyOutcome> {
    if spec.frontends.is_empty() {
        return Err(Error::Config("toy spec lists no front-ends".into()));
    }
    let set = spec.data.generate(spec.seed)?;
    let mut frontends = Vec::with_capacity(spec.frontends.len());
    let mut runs = Vec::with_capacity(spec.frontends.len());
    let mut trial_counts = (0, 0);
    for entry in &spec.frontends {
        let fspec = entry.spec()?;
        let config = TrainConfig {
            seed: spec.seed,
            lambda_mix: entry.lambda_mix.unwrap_or(spec.train.lambda_mix),
            ..spec.train.clone()
        };
        let (model, history) = train(&set.train, &fspec, &config)?;
        let scores = score_heldout(&model, &set.heldout)?;
        trial_counts = scores.scores.iter().fold((0, 0), |(t, n), (_, target)| {
            if *target {
                (t + 1, n)
            } else {
                (t, n + 1)
            }
        });
        let eer = compute_eer(&scores)?;
        let last = history.epochs.last().expect("at least one epoch");
        let (d_alpha, d_beta) = if history.initial_alphas.is_empty() {
            (None, None)
        } else {
            (
                Some(mean_abs_delta(&last.alphas, &history.initial_alphas)),
                Some(mean_abs_delta(&last.betas, &history.initial_betas)),
            )
        };
        frontends.push(FrontendMetrics {
            name: entry.name.clone(),
            n_filters: fspec.n_filters,
            lambda_mix: config.lambda_mix,
            epochs: history.epochs.len(),
            initial_loss: history.initial_loss().unwrap(),
            final_loss: history.final_loss().unwrap(),
            eer: eer.eer,
            eer_threshold: eer.threshold,
            mean_abs_delta_alpha: d_alpha,
            mean_abs_delta_beta: d_beta,
        });
        runs.push(ToyRun {
            name: entry.name.clone(),
            model,
            history,
        });
    }
    Ok(ToyOutcome {
        metrics: ToyMetrics {
            config_hash: config_hash.to_string(),
            seed: spec.seed,
            n_speakers: set.profiles.len(),
            n_train_utterances: set.train.utterances.len(),
            n_heldout_utterances: set.heldout.len(),
            n_target_trials: trial_counts.0,
            n_nontarget_trials: trial_counts.1,
            frontends,
        },
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticSetSpec {
        SyntheticSetSpec {
            n_speakers: 3,
            utterances_per_speaker: 2,
            utterance_s: 2.0,
            heldout_per_speaker: 2,
            ..SyntheticSetSpec::default()
        }
    }

    #[test]
    fn generation_is_deterministic_and_split() {
        let a = small().generate(5).unwrap();
        let b = small().generate(5).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.train.utterances.len(), 6);
        assert_eq!(a.heldout.len(), 6);
        assert_eq!(a.train.n_classes(), 3);
        assert_eq!(a.heldout[0].audio.len(), 64000);
        for u in a.train.utterances.iter().chain(&a.heldout) {
            let peak = u.audio.samples().iter().fold(0.0f64, |m, s| m.max(s.abs()));
            assert!((peak - UTTERANCE_PEAK).abs() < 1e-9);
        }
        // Held-out audio never repeats a training utterance.
        assert!(a.heldout.iter().all(|h| a.train.utterances.iter().all(|t| t.audio.samples()[..100] != h.audio.samples()[..100])));
        assert_ne!(small().generate(6).unwrap().train, a.train);
    }

    #[test]
    fn spec_errors() {
        assert!(SyntheticSetSpec { heldout_s: 3.0, ..small() }.validate().is_err());
        assert!(SyntheticSetSpec { utterances_per_speaker: 1, ..small() }.validate().is_err());
        assert!(matches!(
            SyntheticSetSpec { n_speakers: 1, ..small() }.generate(0),
            Err(Error::Config(_))
        ));
        let json = r#"{"seed": 1, "frontends": [{"name": "mfcc"}]}"#;
        let spec: ToySpec = serde_json::from_str(json).unwrap();
        assert!(matches!(run_toy_experiment(&spec, "x"), Err(Error::Config(_))));
        assert!(serde_json::from_str::<ToySpec>(r#"{"sed": 1}"#).is_err());
    }
}
