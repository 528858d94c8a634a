use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::signal::AudioBuffer;

/// Length of a training crop.
pub const CROP_S: f64 = 2.0;

/// Draws fixed-length training crops at uniformly random offsets from a seeded ChaCha8 stream.
#[derive(Debug, Clone)]
pub struct CropSampler {
    rng: ChaCha8Rng,
    crop_s: f64,
}

impl CropSampler {
    pub fn new(seed: u64) -> Self {
        Self::with_length(seed, CROP_S)
    }

    pub fn with_length(seed: u64, crop_s: f64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            crop_s,
        }
    }

    pub fn crop_len(&self, sample_rate: u32) -> usize {
        (self.crop_s * sample_rate as f64).round() as usize
    }

    /// Offset in `[0, len - crop_len]`, inclusive.
    pub fn draw_offset(&mut self, n_samples: usize, sample_rate: u32) -> Result<usize> {
        let crop = self.crop_len(sample_rate);
        if n_samples < crop || crop == 0 {
            return Err(Error::TooShort(format!(
                "{:.3} s utterance is shorter than the {} s crop",
                n_samples as f64 / sample_rate as f64,
                self.crop_s
            )));
        }
        Ok(self.rng.gen_range(0..=n_samples - crop))
    }

    pub fn crop(&mut self, audio: &AudioBuffer) -> Result<AudioBuffer> {
        let offset = self.draw_offset(audio.len(), audio.sample_rate())?;
        audio.slice(offset, self.crop_len(audio.sample_rate()))
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// `batch` crops from utterances drawn uniformly with replacement; returns `(utterance index, crop)`.
pub fn train_2s_crop_sampler(
    dataset: &[AudioBuffer],
    batch: usize,
    seed: u64,
) -> Result<Vec<(usize, AudioBuffer)>> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("no utterances to crop".into()));
    }
    let mut sampler = CropSampler::new(seed);
    (0..batch)
        .map(|_| {
            let idx = sampler.rng().gen_range(0..dataset.len());
            Ok((idx, sampler.crop(&dataset[idx])?))
        })
        .collect()
}
