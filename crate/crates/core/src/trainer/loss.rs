use crate::error::{Error, Result};

const NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AmSoftmaxOutput {
    pub loss: f64,
    /// `batch x D`, row-major.
    pub grad_embeddings: Vec<f64>,
    /// `C x D`, row-major.
    pub grad_class_weights: Vec<f64>,
}

fn normalize_rows(x: &[f64], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut unit = Vec::with_capacity(x.len());
    let mut norms = Vec::with_capacity(x.len() / dim);
    for row in x.chunks_exact(dim) {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(NORM_FLOOR);
        unit.extend(row.iter().map(|v| v / norm));
        norms.push(norm);
    }
    (unit, norms)
}

/// Backpropagates through `u = v / |v|`: `dv = (du - u (u·du)) / |v|`.
fn normalize_rows_backward(unit: &[f64], norms: &[f64], grad_unit: &[f64], dim: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(unit.len());
    for ((u, g), norm) in unit.chunks_exact(dim).zip(grad_unit.chunks_exact(dim)).zip(norms) {
        let proj: f64 = u.iter().zip(g).map(|(a, b)| a * b).sum();
        out.extend(u.iter().zip(g).map(|(a, b)| (b - a * proj) / norm));
    }
    out
}

/// Additive-margin softmax over cosine logits.
///
/// `loss = -mean_b log(e^{s(cos θ_y - m)} / (e^{s(cos θ_y - m)} + Σ_{j≠y} e^{s cos θ_j}))`
/// with embeddings and class weights L2-normalized row-wise. Gradients flow back
/// through both normalizations.
pub fn am_softmax_loss(
    embeddings: &[f64],
    class_weights: &[f64],
    labels: &[usize],
    dim: usize,
    scale: f64,
    margin: f64,
) -> Result<AmSoftmaxOutput> {
    let batch = labels.len();
    if dim == 0 || batch == 0 || embeddings.len() != batch * dim || class_weights.len() % dim != 0 {
        return Err(Error::Shape(format!(
            "{} embedding values for {batch} labels of dimension {dim}, {} class-weight values",
            embeddings.len(),
            class_weights.len()
        )));
    }
    let n_classes = class_weights.len() / dim;
    if let Some(bad) = labels.iter().find(|&&y| y >= n_classes) {
        return Err(Error::Domain(format!("label {bad} outside [0, {n_classes})")));
    }

    let (e_unit, e_norm) = normalize_rows(embeddings, dim);
    let (w_unit, w_norm) = normalize_rows(class_weights, dim);

    let mut loss = 0.0;
    // d loss / d cos, batch x C
    let mut g_cos = vec![0.0; batch * n_classes];
    let mut logits = vec![0.0; n_classes];
    for b in 0..batch {
        let e = &e_unit[b * dim..(b + 1) * dim];
        for (j, w) in w_unit.chunks_exact(dim).enumerate() {
            let cos: f64 = e.iter().zip(w).map(|(x, y)| x * y).sum();
            logits[j] = scale * (cos - if j == labels[b] { margin } else { 0.0 });
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = logits.iter().map(|z| (z - max).exp()).sum();
        let log_norm = max + sum_exp.ln();
        loss += log_norm - logits[labels[b]];
        for j in 0..n_classes {
            let p = (logits[j] - log_norm).exp();
            let target = if j == labels[b] { 1.0 } else { 0.0 };
            g_cos[b * n_classes + j] = scale * (p - target) / batch as f64;
        }
    }
    loss /= batch as f64;

    let mut g_e_unit = vec![0.0; batch * dim];
    let mut g_w_unit = vec![0.0; n_classes * dim];
    for b in 0..batch {
        for j in 0..n_classes {
            let g = g_cos[b * n_classes + j];
            for k in 0..dim {
                g_e_unit[b * dim + k] += g * w_unit[j * dim + k];
                g_w_unit[j * dim + k] += g * e_unit[b * dim + k];
            }
        }
    }

    Ok(AmSoftmaxOutput {
        loss,
        grad_embeddings: normalize_rows_backward(&e_unit, &e_norm, &g_e_unit, dim),
        grad_class_weights: normalize_rows_backward(&w_unit, &w_norm, &g_w_unit, dim),
    })
}
