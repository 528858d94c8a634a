use serde::{Deserialize, Serialize};

use super::BETA_MIN;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterShape {
    Triangle,
    Bell,
}

impl FilterShape {
    pub fn code(self) -> u32 {
        match self {
            FilterShape::Triangle => 0,
            FilterShape::Bell => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(FilterShape::Triangle),
            1 => Some(FilterShape::Bell),
            _ => None,
        }
    }
}

/// Learnable state of a filterbank: one `(alpha, beta)` pair per filter, in bin units.
///
/// Serialized as `{shape, n_bins, n_filters, alphas, betas}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr", into = "ParamsRepr")]
pub struct FilterBankParams {
    pub shape: FilterShape,
    pub n_bins: usize,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ParamsRepr {
    shape: FilterShape,
    n_bins: usize,
    n_filters: usize,
    alphas: Vec<f64>,
    betas: Vec<f64>,
}

impl TryFrom<ParamsRepr> for FilterBankParams {
    type Error = Error;

    fn try_from(r: ParamsRepr) -> Result<Self> {
        if r.alphas.len() != r.n_filters || r.betas.len() != r.n_filters {
            return Err(Error::Shape(format!(
                "n_filters = {} but {} alphas and {} betas",
                r.n_filters,
                r.alphas.len(),
                r.betas.len()
            )));
        }
        let params = FilterBankParams::new(r.shape, r.n_bins, r.alphas, r.betas)?;
        Ok(params)
    }
}

impl From<FilterBankParams> for ParamsRepr {
    fn from(p: FilterBankParams) -> Self {
        ParamsRepr {
            shape: p.shape,
            n_bins: p.n_bins,
            n_filters: p.alphas.len(),
            alphas: p.alphas,
            betas: p.betas,
        }
    }
}

impl FilterBankParams {
    /// Validated constructor; see [`FilterBankParams::validate`].
    pub fn new(shape: FilterShape, n_bins: usize, alphas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        let params = Self {
            shape,
            n_bins,
            alphas,
            betas,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn n_filters(&self) -> usize {
        self.alphas.len()
    }

    /// Structural checks plus `beta >= BETA_MIN`. Centers outside `[0, N-1]` are
    /// tolerated here and brought back by [`project_params`].
    pub fn validate(&self) -> Result<()> {
        if self.n_bins < 2 {
            return Err(Error::Config(format!("n_bins = {} (need at least 2)", self.n_bins)));
        }
        if self.alphas.is_empty() {
            return Err(Error::Config("filterbank needs at least one filter".into()));
        }
        if self.alphas.len() != self.betas.len() {
            return Err(Error::Shape(format!(
                "{} alphas but {} betas",
                self.alphas.len(),
                self.betas.len()
            )));
        }
        if self.alphas.iter().any(|a| !a.is_finite()) {
            return Err(Error::Domain("non-finite filter center".into()));
        }
        if let Some(b) = self.betas.iter().find(|b| !(**b >= BETA_MIN) || !b.is_finite()) {
            return Err(Error::Domain(format!("bandwidth {b} below minimum {BETA_MIN}")));
        }
        Ok(())
    }

    pub fn is_projected(&self) -> bool {
        let top = (self.n_bins - 1) as f64;
        self.alphas.iter().all(|a| (0.0..=top).contains(a))
            && self.betas.iter().all(|b| *b >= BETA_MIN)
    }
}

/// Clamps bandwidths to `>= BETA_MIN` and centers to `[0, N-1]`. Idempotent.
pub fn project_params(params: &FilterBankParams) -> FilterBankParams {
    let top = params.n_bins.saturating_sub(1) as f64;
    FilterBankParams {
        shape: params.shape,
        n_bins: params.n_bins,
        alphas: params
            .alphas
            .iter()
            .map(|a| if a.is_nan() { 0.0 } else { a.clamp(0.0, top) })
            .collect(),
        betas: params
            .betas
            .iter()
            .map(|b| if b.is_nan() { BETA_MIN } else { b.max(BETA_MIN) })
            .collect(),
    }
}
