//! Learnable frequency filters applied to an STFT spectrum.
//!
//! Each of the `M` filters is described by a center `alpha` and a bandwidth
//! `beta`, both in (fractional) bin units over `0..N`. The triangle shape is
//! `max(0, 1 - 2|n - alpha| / beta)`, so `beta` is its full base width; the
//! bell shape is `exp(-(n - alpha)^2 / (2 beta^2))`. Both peak at 1. Stacking
//! the responses gives an `N x M` weight matrix; features are
//! `10 log10(spectrum · W + eps)`.
//!
//! The weight matrix is always derived from the parameters. Gradients with
//! respect to every `alpha` and `beta` are computed analytically in
//! [`backward`].

mod mel;
mod params;

pub use mel::{bin_to_hz, hz_to_bin, hz_to_mel, mel_edges_bins, mel_init, mel_to_hz};
pub use params::{project_params, FilterBankParams, FilterShape};

use std::f64::consts::LN_10;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::stft::SpectrumMatrix;

/// Smallest admissible bandwidth, in bins.
pub const BETA_MIN: f64 = 0.5;

/// Floor added inside the logarithm.
pub const DEFAULT_EPSILON: f64 = 1e-10;

pub fn db_floor(epsilon: f64) -> f64 {
    10.0 * epsilon.log10()
}

pub fn filter_response(shape: FilterShape, alpha: f64, beta: f64, n: f64) -> f64 {
    let d = n - alpha;
    match shape {
        FilterShape::Triangle => (1.0 - 2.0 * d.abs() / beta).max(0.0),
        FilterShape::Bell => (-(d * d) / (2.0 * beta * beta)).exp(),
    }
}

/// Response together with its partial derivatives `(w, dw/dalpha, dw/dbeta)`.
///
/// Triangle derivatives are taken on the open support `0 < w < 1`; the kinks at
/// the peak and at the base edges get a zero subgradient.
pub fn response_with_grad(shape: FilterShape, alpha: f64, beta: f64, n: f64) -> (f64, f64, f64) {
    let d = n - alpha;
    match shape {
        FilterShape::Triangle => {
            let a = d.abs();
            let w = 1.0 - 2.0 * a / beta;
            if w <= 0.0 {
                (0.0, 0.0, 0.0)
            } else if a == 0.0 {
                (1.0, 0.0, 0.0)
            } else {
                (w, 2.0 / beta * d.signum(), 2.0 * a / (beta * beta))
            }
        }
        FilterShape::Bell => {
            let b2 = beta * beta;
            let w = (-(d * d) / (2.0 * b2)).exp();
            (w, w * d / b2, w * d * d / (b2 * beta))
        }
    }
}

/// Bins where filter `(alpha, beta)` can be non-zero.
pub fn support(shape: FilterShape, alpha: f64, beta: f64, n_bins: usize) -> Range<usize> {
    match shape {
        FilterShape::Triangle => {
            let half = beta / 2.0;
            let lo = (alpha - half).ceil().max(0.0);
            let hi = (alpha + half).floor() + 1.0;
            let hi = hi.min(n_bins as f64);
            if hi <= lo {
                0..0
            } else {
                lo as usize..hi as usize
            }
        }
        FilterShape::Bell => 0..n_bins,
    }
}

/// `N x M` filter weights, row-major over bins.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    pub n_bins: usize,
    pub n_filters: usize,
    pub values: Vec<f64>,
}

impl WeightMatrix {
    pub fn get(&self, n: usize, i: usize) -> f64 {
        self.values[n * self.n_filters + i]
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.n_bins).map(|n| self.get(n, i)).collect()
    }
}

pub fn build_weight_matrix(params: &FilterBankParams) -> Result<WeightMatrix> {
    params.validate()?;
    let (n_bins, n_filters) = (params.n_bins, params.n_filters());
    let mut values = vec![0.0; n_bins * n_filters];
    for (i, (&a, &b)) in params.alphas.iter().zip(&params.betas).enumerate() {
        for n in support(params.shape, a, b, n_bins) {
            values[n * n_filters + i] = filter_response(params.shape, a, b, n as f64);
        }
    }
    Ok(WeightMatrix {
        n_bins,
        n_filters,
        values,
    })
}

/// `T x M` dB features, row-major over frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Vec<f64>,
    n_frames: usize,
    n_filters: usize,
    params_snapshot: Option<FilterBankParams>,
}

impl FeatureMatrix {
    pub fn from_values(values: Vec<f64>, n_frames: usize, n_filters: usize) -> Result<Self> {
        if values.len() != n_frames * n_filters {
            return Err(Error::Shape(format!(
                "{} values for a {n_frames}x{n_filters} feature matrix",
                values.len()
            )));
        }
        Ok(Self {
            values,
            n_frames,
            n_filters,
            params_snapshot: None,
        })
    }

    pub fn with_params(mut self, params: FilterBankParams) -> Self {
        self.params_snapshot = Some(params);
        self
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_filters(&self) -> usize {
        self.n_filters
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, t: usize, i: usize) -> f64 {
        self.values[t * self.n_filters + i]
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.values[t * self.n_filters..(t + 1) * self.n_filters]
    }

    /// Filter parameters the features were computed with, for LFF outputs.
    pub fn params_snapshot(&self) -> Option<&FilterBankParams> {
        self.params_snapshot.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradients {
    pub d_alpha: Vec<f64>,
    pub d_beta: Vec<f64>,
}

impl ParamGradients {
    pub fn zeros(n_filters: usize) -> Self {
        Self {
            d_alpha: vec![0.0; n_filters],
            d_beta: vec![0.0; n_filters],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d_alpha.iter().chain(&self.d_beta).all(|g| g.is_finite())
    }
}

/// Per-filter weights restricted to the filter's support.
struct SparseColumn {
    start: usize,
    weights: Vec<f64>,
}

fn sparse_columns(params: &FilterBankParams) -> Vec<SparseColumn> {
    params
        .alphas
        .iter()
        .zip(&params.betas)
        .map(|(&a, &b)| {
            let range = support(params.shape, a, b, params.n_bins);
            SparseColumn {
                start: range.start,
                weights: range
                    .map(|n| filter_response(params.shape, a, b, n as f64))
                    .collect(),
            }
        })
        .collect()
}

fn check_shapes(spectrum: &SpectrumMatrix, params: &FilterBankParams, epsilon: f64) -> Result<()> {
    params.validate()?;
    if spectrum.n_bins() != params.n_bins {
        return Err(Error::Shape(format!(
            "spectrum has {} bins but the filterbank expects {}",
            spectrum.n_bins(),
            params.n_bins
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("epsilon {epsilon} must be positive")));
    }
    Ok(())
}

/// Filterbank energies before the logarithm, `T x M`.
fn filter_energies(spectrum: &SpectrumMatrix, columns: &[SparseColumn]) -> Vec<f64> {
    let m = columns.len();
    let mut out = vec![0.0; spectrum.n_frames() * m];
    for t in 0..spectrum.n_frames() {
        let frame = spectrum.frame(t);
        for (i, col) in columns.iter().enumerate() {
            out[t * m + i] = frame[col.start..col.start + col.weights.len()]
                .iter()
                .zip(&col.weights)
                .map(|(s, w)| s * w)
                .sum();
        }
    }
    out
}

pub fn forward(spectrum: &SpectrumMatrix, params: &FilterBankParams, epsilon: f64) -> Result<FeatureMatrix> {
    check_shapes(spectrum, params, epsilon)?;
    let energies = filter_energies(spectrum, &sparse_columns(params));
    let values = energies.iter().map(|e| 10.0 * (e + epsilon).log10()).collect();
    Ok(FeatureMatrix::from_values(values, spectrum.n_frames(), params.n_filters())?
        .with_params(params.clone()))
}

/// Gradients of `sum(upstream ⊙ forward(spectrum, params))` with respect to every alpha and beta.
pub fn backward(
    spectrum: &SpectrumMatrix,
    params: &FilterBankParams,
    upstream_grad: &[f64],
    epsilon: f64,
) -> Result<ParamGradients> {
    check_shapes(spectrum, params, epsilon)?;
    let (n_frames, m) = (spectrum.n_frames(), params.n_filters());
    if upstream_grad.len() != n_frames * m {
        return Err(Error::Shape(format!(
            "upstream gradient has {} values, expected {n_frames}x{m}",
            upstream_grad.len()
        )));
    }
    let energies = filter_energies(spectrum, &sparse_columns(params));
    // d(10 log10(e + eps)) / de
    let g_energy: Vec<f64> = energies
        .iter()
        .zip(upstream_grad)
        .map(|(e, g)| g * 10.0 / (LN_10 * (e + epsilon)))
        .collect();

    let mut grads = ParamGradients::zeros(m);
    for i in 0..m {
        let (a, b) = (params.alphas[i], params.betas[i]);
        for n in support(params.shape, a, b, params.n_bins) {
            let (_, dw_da, dw_db) = response_with_grad(params.shape, a, b, n as f64);
            if dw_da == 0.0 && dw_db == 0.0 {
                continue;
            }
            let c: f64 = (0..n_frames)
                .map(|t| g_energy[t * m + i] * spectrum.get(t, n))
                .sum();
            grads.d_alpha[i] += c * dw_da;
            grads.d_beta[i] += c * dw_db;
        }
    }
    Ok(grads)
}
