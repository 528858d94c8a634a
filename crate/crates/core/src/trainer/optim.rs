use serde::{Deserialize, Serialize};

/// Parameter update rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum UpdateRule {
    /// `v = momentum * v + g; p -= lr * v`
    Sgd { momentum: f64 },
    /// Kingma & Ba with bias correction; `p -= lr * m_hat / (sqrt(v_hat) + eps)`.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for UpdateRule {
    fn default() -> Self {
        UpdateRule::Sgd { momentum: 0.9 }
    }
}

impl UpdateRule {
    pub fn adam() -> Self {
        UpdateRule::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer state for a fixed list of parameter tensors.
#[derive(Debug, Clone)]
pub struct Optimizer {
    rule: UpdateRule,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    steps: u64,
}

impl Optimizer {
    pub fn new(rule: UpdateRule, sizes: &[usize]) -> Self {
        let zeros = || sizes.iter().map(|&n| vec![0.0; n]).collect();
        Self {
            rule,
            first: zeros(),
            second: zeros(),
            steps: 0,
        }
    }

    /// Applies one update; `lrs[k]` is the learning rate for tensor `k`.
    pub fn step(&mut self, params: &mut [&mut Vec<f64>], grads: &[&Vec<f64>], lrs: &[f64]) {
        self.steps += 1;
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let lr = lrs[k];
            match self.rule {
                UpdateRule::Sgd { momentum } => {
                    for ((p, g), v) in p.iter_mut().zip(g.iter()).zip(self.first[k].iter_mut()) {
                        *v = momentum * *v + g;
                        *p -= lr * *v;
                    }
                }
                UpdateRule::Adam { beta1, beta2, eps } => {
                    let c1 = 1.0 - beta1.powi(self.steps as i32);
                    let c2 = 1.0 - beta2.powi(self.steps as i32);
                    for (((p, g), m), v) in p
                        .iter_mut()
                        .zip(g.iter())
                        .zip(self.first[k].iter_mut())
                        .zip(self.second[k].iter_mut())
                    {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                    }
                }
            }
        }
    }
}
