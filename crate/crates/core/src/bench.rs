//! Stride sweep: analytic multiply-accumulate counts and wall-clock time per front-end.
//!
//! Filterbank front-ends always run at the STFT hop of the spec, so each sweep cell
//! (a convolution stride and pooling factor) changes only the Sinc/Gabor cost.
//!
//! Counts per `L`-sample input:
//! - STFT path: `T·(n_fft/2)·log2(n_fft)` FFT operations and `T·N·M` filter MACs
//! - convolution path: `c·M·K·floor((L − K)/stride + 1)` with `c = 2` for the Gabor pair

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::{self, mel_init, DEFAULT_EPSILON};
use crate::signal::{synth_speaker_utterance, AudioBuffer, SyntheticSpeakerProfile};
use crate::stft::{StftConfig, StftPlan};
use crate::timedomain::{frontend_forward, TimeKernelParams};
use crate::trainer::{FrontendKind, FrontendSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchCell {
    pub stride: usize,
    pub pool: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSpec {
    pub duration_s: f64,
    pub sample_rate: u32,
    /// Timed repetitions per cell; the median is reported. 0 skips timing.
    pub repeats: usize,
    pub n_filters: usize,
    pub kernel_len: usize,
    pub stft: StftConfig,
    pub frontends: Vec<String>,
    pub cells: Vec<BenchCell>,
    pub seed: u64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            duration_s: 60.0,
            sample_rate: 16000,
            repeats: 3,
            n_filters: 64,
            kernel_len: 401,
            stft: StftConfig::default(),
            frontends: vec!["lff-t".into(), "sinc".into(), "gabor".into()],
            cells: vec![
                BenchCell { stride: 160, pool: 1 },
                BenchCell { stride: 80, pool: 2 },
                BenchCell { stride: 40, pool: 4 },
            ],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub frontend: String,
    pub stride: usize,
    pub pool: usize,
    pub n_frames: usize,
    pub fft_macs: u64,
    pub filter_macs: u64,
    pub conv_macs: u64,
    pub median_seconds: Option<f64>,
}

impl BenchRow {
    pub fn total_macs(&self) -> u64 {
        self.fft_macs + self.filter_macs + self.conv_macs
    }
}

pub const BENCH_CSV_COLUMNS: [&str; 11] = [
    "frontend",
    "stride",
    "pool",
    "n_frames",
    "fft_macs",
    "filter_macs",
    "conv_macs",
    "total_macs",
    "median_seconds",
    "repeats",
    "config_hash",
];

/// `(fft, filter)` operation counts of an STFT filterbank front-end on `n_samples`.
pub fn stft_macs(config: &StftConfig, n_filters: usize, n_samples: usize) -> (u64, u64) {
    let t = config.n_frames(n_samples) as u64;
    let log2 = config.n_fft.trailing_zeros() as u64;
    let fft = t * (config.n_fft as u64 / 2) * log2;
    let filter = t * config.n_bins() as u64 * n_filters as u64;
    (fft, filter)
}

/// Fixed benchmark input: a 120 Hz synthetic voice with 20 harmonics.
pub fn bench_input(duration_s: f64, sample_rate: u32, seed: u64) -> Result<AudioBuffer> {
    let profile = SyntheticSpeakerProfile {
        fundamental_hz: 120.0,
        harmonic_amplitudes: vec![1.0; 20],
        spectral_tilt_db_per_octave: -6.0,
        jitter_fraction: 0.01,
    };
    synth_speaker_utterance(&profile, duration_s, sample_rate, seed)
}

fn median_seconds(repeats: usize, mut f: impl FnMut() -> Result<()>) -> Result<Option<f64>> {
    if repeats == 0 {
        return Ok(None);
    }
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        f()?;
        times.push(start.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    let mid = times.len() / 2;
    Ok(Some(if times.len() % 2 == 1 {
        times[mid]
    } else {
        0.5 * (times[mid - 1] + times[mid])
    }))
}

impl BenchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.frontends.is_empty() || self.cells.is_empty() {
            return Err(Error::Config("sweep needs at least one front-end and one (stride, pool) cell".into()));
        }
        if self.cells.iter().any(|c| c.stride == 0 || c.pool == 0) {
            return Err(Error::Config("stride and pool must be positive".into()));
        }
        if !(self.duration_s > 0.0) || self.sample_rate == 0 || self.n_filters == 0 {
            return Err(Error::Config("duration, sample rate and filter count must be positive".into()));
        }
        self.stft.validate()?;
        for name in &self.frontends {
            FrontendSpec::named(name)?;
        }
        Ok(())
    }

    /// MAC counts for every (front-end, cell) pair; wall-clock only when `repeats > 0`.
    pub fn run(&self) -> Result<Vec<BenchRow>> {
        self.validate()?;
        let audio = bench_input(self.duration_s, self.sample_rate, self.seed)?;
        let n = audio.len();
        let mut rows = Vec::new();
        for name in &self.frontends {
            let spec = FrontendSpec::named(name)?;
            for cell in &self.cells {
                let row = match spec.kind {
                    FrontendKind::Lff | FrontendKind::MelFrozen => {
                        let params = mel_init(self.n_filters, self.stft.n_bins(), self.sample_rate, spec.shape)?;
                        let plan = StftPlan::new(self.stft)?;
                        let (fft_macs, filter_macs) = stft_macs(&self.stft, self.n_filters, n);
                        let median = median_seconds(self.repeats, || {
                            filterbank::forward(&plan.compute(&audio)?, &params, DEFAULT_EPSILON).map(drop)
                        })?;
                        BenchRow {
                            frontend: name.clone(),
                            stride: cell.stride,
                            pool: cell.pool,
                            n_frames: self.stft.n_frames(n),
                            fft_macs,
                            filter_macs,
                            conv_macs: 0,
                            median_seconds: median,
                        }
                    }
                    FrontendKind::Sinc | FrontendKind::Gabor => {
                        let make = if spec.kind == FrontendKind::Sinc {
                            TimeKernelParams::mel_sinc
                        } else {
                            TimeKernelParams::mel_gabor
                        };
                        let params = make(self.n_filters, self.sample_rate, self.kernel_len, cell.stride, cell.pool)?;
                        let median = median_seconds(self.repeats, || {
                            frontend_forward(&audio, &params, DEFAULT_EPSILON).map(drop)
                        })?;
                        BenchRow {
                            frontend: name.clone(),
                            stride: cell.stride,
                            pool: cell.pool,
                            n_frames: params.n_frames(n),
                            fft_macs: 0,
                            filter_macs: 0,
                            conv_macs: params.conv_macs(n),
                            median_seconds: median,
                        }
                    }
                };
                rows.push(row);
            }
        }
        Ok(rows)
    }
}

pub fn write_bench_csv(mut w: impl Write, rows: &[BenchRow], repeats: usize, hash: &str) -> Result<()> {
    writeln!(w, "{}", BENCH_CSV_COLUMNS.join(","))?;
    for r in rows {
        let median = r.median_seconds.map(|s| s.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{median},{repeats},{hash}",
            r.frontend,
            r.stride,
            r.pool,
            r.n_frames,
            r.fft_macs,
            r.filter_macs,
            r.conv_macs,
            r.total_macs()
        )?;
    }
    Ok(())
}
