use super::{FilterBankParams, FilterShape, BETA_MIN};
use crate::error::{Error, Result};

/// HTK Mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Bin positions map linearly onto frequency: bin 0 is 0 Hz and bin `N-1` is Nyquist.
pub fn hz_to_bin(hz: f64, n_bins: usize, sample_rate: u32) -> f64 {
    hz / (sample_rate as f64 / 2.0) * (n_bins - 1) as f64
}

pub fn bin_to_hz(bin: f64, n_bins: usize, sample_rate: u32) -> f64 {
    bin * (sample_rate as f64 / 2.0) / (n_bins - 1) as f64
}

/// `M + 2` Mel-equispaced points between 0 Hz and Nyquist, expressed in bins.
pub fn mel_edges_bins(n_filters: usize, n_bins: usize, sample_rate: u32) -> Vec<f64> {
    let top = hz_to_mel(sample_rate as f64 / 2.0);
    (0..n_filters + 2)
        .map(|k| {
            let mel = top * k as f64 / (n_filters + 1) as f64;
            hz_to_bin(mel_to_hz(mel), n_bins, sample_rate)
        })
        .collect()
}

/// Parameters reproducing a Mel-scale filterbank.
///
/// Filter `i` is centered on edge point `i + 1`. Triangles take the full span
/// between the neighbouring edge points as `beta`; bells take a quarter of it,
/// so `±2 beta` covers the same span.
pub fn mel_init(n_filters: usize, n_bins: usize, sample_rate: u32, shape: FilterShape) -> Result<FilterBankParams> {
    if n_filters == 0 {
        return Err(Error::Config("need at least one filter".into()));
    }
    if n_bins < 2 {
        return Err(Error::Config(format!("n_bins = {n_bins} (need at least 2)")));
    }
    if sample_rate == 0 {
        return Err(Error::Config("sample rate must be positive".into()));
    }
    let edges = mel_edges_bins(n_filters, n_bins, sample_rate);
    let alphas: Vec<f64> = edges[1..=n_filters].to_vec();
    let betas: Vec<f64> = edges
        .windows(3)
        .map(|w| {
            let base = w[2] - w[0];
            match shape {
                FilterShape::Triangle => base,
                FilterShape::Bell => base / 4.0,
            }
        })
        .collect();
    if let Some((i, b)) = betas.iter().enumerate().find(|(_, b)| **b < BETA_MIN) {
        return Err(Error::Config(format!(
            "{n_filters} Mel filters over {n_bins} bins: filter {i} gets bandwidth {b:.3} < {BETA_MIN}"
        )));
    }
    FilterBankParams::new(shape, n_bins, alphas, betas)
}
