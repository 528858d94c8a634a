use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Variance floor of the per-feature normalization.
pub const NORM_EPS: f64 = 1e-5;
/// Variance floor of the standard-deviation pooling.
pub const POOL_EPS: f64 = 1e-5;

/// Affine map `y = W x + b` with `W` stored `n_out x n_in`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    /// Uniform init in `±sqrt(6 / fan_in)` (ReLU layers) or `±sqrt(6 / (fan_in + fan_out))`.
    pub fn init(n_in: usize, n_out: usize, relu: bool, rng: &mut ChaCha8Rng) -> Self {
        let limit = if relu {
            (6.0 / n_in as f64).sqrt()
        } else {
            (6.0 / (n_in + n_out) as f64).sqrt()
        };
        Self {
            n_in,
            n_out,
            weights: (0..n_in * n_out).map(|_| rng.gen_range(-limit..limit)).collect(),
            bias: vec![0.0; n_out],
        }
    }

    fn forward_into(&self, x: &[f64], y: &mut [f64]) {
        for (o, out) in y.iter_mut().enumerate() {
            let row = &self.weights[o * self.n_in..(o + 1) * self.n_in];
            *out = self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    /// Accumulates parameter gradients and returns `d loss / d x`.
    fn backward_into(&self, x: &[f64], dy: &[f64], grads: &mut DenseGrads, dx: &mut [f64]) {
        dx.iter_mut().for_each(|v| *v = 0.0);
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grads.bias[o] += g;
            let row = &self.weights[o * self.n_in..(o + 1) * self.n_in];
            let grow = &mut grads.weights[o * self.n_in..(o + 1) * self.n_in];
            for i in 0..self.n_in {
                grow[i] += g * x[i];
                dx[i] += g * row[i];
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseGrads {
    fn zeros(layer: &Dense) -> Self {
        Self {
            weights: vec![0.0; layer.weights.len()],
            bias: vec![0.0; layer.bias.len()],
        }
    }
}

/// Per-feature normalization over time, two per-frame affine+ReLU layers,
/// mean+std pooling over time and an affine embedding layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyBackbone {
    pub layer1: Dense,
    pub layer2: Dense,
    pub embedding: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneGrads {
    pub layer1: DenseGrads,
    pub layer2: DenseGrads,
    pub embedding: DenseGrads,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct BackboneCache {
    n_frames: usize,
    normalized: Vec<f64>,
    inv_std: Vec<f64>,
    hidden1: Vec<f64>,
    hidden2: Vec<f64>,
    pooled: Vec<f64>,
}

impl ToyBackbone {
    pub fn init(n_features: usize, hidden: usize, embedding_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            layer1: Dense::init(n_features, hidden, true, rng),
            layer2: Dense::init(hidden, hidden, true, rng),
            embedding: Dense::init(2 * hidden, embedding_dim, false, rng),
        }
    }

    pub fn n_features(&self) -> usize {
        self.layer1.n_in
    }

    pub fn hidden(&self) -> usize {
        self.layer2.n_out
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding.n_out
    }

    pub fn zero_grads(&self) -> BackboneGrads {
        BackboneGrads {
            layer1: DenseGrads::zeros(&self.layer1),
            layer2: DenseGrads::zeros(&self.layer2),
            embedding: DenseGrads::zeros(&self.embedding),
        }
    }

    /// Embeds a `T x M` feature matrix (row-major).
    pub fn forward(&self, features: &[f64], n_frames: usize) -> Result<(Vec<f64>, BackboneCache)> {
        let m = self.n_features();
        if n_frames == 0 || features.len() != n_frames * m {
            return Err(Error::Shape(format!(
                "backbone expects T x {m} features, got {} values for T = {n_frames}",
                features.len()
            )));
        }
        let t_len = n_frames as f64;

        let mut normalized = vec![0.0; features.len()];
        let mut inv_std = vec![0.0; m];
        for i in 0..m {
            let mean = (0..n_frames).map(|t| features[t * m + i]).sum::<f64>() / t_len;
            let var = (0..n_frames)
                .map(|t| (features[t * m + i] - mean).powi(2))
                .sum::<f64>()
                / t_len;
            inv_std[i] = 1.0 / (var + NORM_EPS).sqrt();
            for t in 0..n_frames {
                normalized[t * m + i] = (features[t * m + i] - mean) * inv_std[i];
            }
        }

        let h = self.hidden();
        let mut hidden1 = vec![0.0; n_frames * self.layer1.n_out];
        let mut hidden2 = vec![0.0; n_frames * h];
        for t in 0..n_frames {
            let h1 = &mut hidden1[t * self.layer1.n_out..(t + 1) * self.layer1.n_out];
            self.layer1.forward_into(&normalized[t * m..(t + 1) * m], h1);
            h1.iter_mut().for_each(|v| *v = v.max(0.0));
            let h2 = &mut hidden2[t * h..(t + 1) * h];
            self.layer2.forward_into(h1, h2);
            h2.iter_mut().for_each(|v| *v = v.max(0.0));
        }

        let mut pooled = vec![0.0; 2 * h];
        for k in 0..h {
            let mean = (0..n_frames).map(|t| hidden2[t * h + k]).sum::<f64>() / t_len;
            let var = (0..n_frames)
                .map(|t| (hidden2[t * h + k] - mean).powi(2))
                .sum::<f64>()
                / t_len;
            pooled[k] = mean;
            pooled[h + k] = (var + POOL_EPS).sqrt();
        }
        let mut embedding = vec![0.0; self.embedding_dim()];
        self.embedding.forward_into(&pooled, &mut embedding);
        Ok((
            embedding,
            BackboneCache {
                n_frames,
                normalized,
                inv_std,
                hidden1,
                hidden2,
                pooled,
            },
        ))
    }

    /// Accumulates weight gradients into `grads` and returns `d loss / d features` (`T x M`).
    pub fn backward(&self, cache: &BackboneCache, d_embedding: &[f64], grads: &mut BackboneGrads) -> Vec<f64> {
        let (n_frames, m, h) = (cache.n_frames, self.n_features(), self.hidden());
        let h1_dim = self.layer1.n_out;
        let t_len = n_frames as f64;

        let mut d_pooled = vec![0.0; 2 * h];
        self.embedding
            .backward_into(&cache.pooled, d_embedding, &mut grads.embedding, &mut d_pooled);

        // Mean and standard-deviation pooling.
        let mut d_h2 = vec![0.0; n_frames * h];
        for k in 0..h {
            let mean = cache.pooled[k];
            let std = cache.pooled[h + k];
            for t in 0..n_frames {
                let centered = cache.hidden2[t * h + k] - mean;
                d_h2[t * h + k] = d_pooled[k] / t_len + d_pooled[h + k] * centered / (t_len * std);
            }
        }

        let mut d_normalized = vec![0.0; n_frames * m];
        let mut d_h1 = vec![0.0; h1_dim];
        for t in 0..n_frames {
            let h2 = &cache.hidden2[t * h..(t + 1) * h];
            let g2: Vec<f64> = d_h2[t * h..(t + 1) * h]
                .iter()
                .zip(h2)
                .map(|(g, a)| if *a > 0.0 { *g } else { 0.0 })
                .collect();
            let h1 = &cache.hidden1[t * h1_dim..(t + 1) * h1_dim];
            self.layer2.backward_into(h1, &g2, &mut grads.layer2, &mut d_h1);
            let g1: Vec<f64> = d_h1
                .iter()
                .zip(h1)
                .map(|(g, a)| if *a > 0.0 { *g } else { 0.0 })
                .collect();
            self.layer1.backward_into(
                &cache.normalized[t * m..(t + 1) * m],
                &g1,
                &mut grads.layer1,
                &mut d_normalized[t * m..(t + 1) * m],
            );
        }

        // Per-feature normalization: dx = inv_std (dz - mean(dz) - z mean(dz z)).
        let mut d_features = vec![0.0; n_frames * m];
        for i in 0..m {
            let mean_dz = (0..n_frames).map(|t| d_normalized[t * m + i]).sum::<f64>() / t_len;
            let mean_dz_z = (0..n_frames)
                .map(|t| d_normalized[t * m + i] * cache.normalized[t * m + i])
                .sum::<f64>()
                / t_len;
            for t in 0..n_frames {
                let z = cache.normalized[t * m + i];
                d_features[t * m + i] = cache.inv_std[i] * (d_normalized[t * m + i] - mean_dz - z * mean_dz_z);
            }
        }
        d_features
    }
}
