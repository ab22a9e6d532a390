use serde::{Deserialize, Serialize};

use super::transform::mean_std;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    /// Per-feature standardization applied before the linear score.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Weights on the standardized scale.
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticParams {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let z: f64 = x
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .zip(&self.weights)
            .map(|(((v, mu), sd), w)| w * (v - mu) / sd)
            .sum::<f64>()
            + self.bias;
        sigmoid(z)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean cross-entropy plus `l2/2 · ‖w‖²` (bias unpenalized) and its gradient
/// with respect to `(w, b)`.
pub fn loss_and_gradient(x: &[Vec<f64>], y: &[f64], weights: &[f64], bias: f64, l2: f64) -> (f64, Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    let mut loss = 0.0;
    for (row, &target) in x.iter().zip(y) {
        let z: f64 = row.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>() + bias;
        // log(1+e^z) - y z, stable for large |z|
        loss += softplus(z) - target * z;
        let r = sigmoid(z) - target;
        for (g, a) in grad_w.iter_mut().zip(row) {
            *g += r * a;
        }
        grad_b += r;
    }
    loss /= n;
    grad_b /= n;
    for (g, w) in grad_w.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    (loss, grad_w, grad_b)
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Full-batch gradient descent on standardized copies of the rows.
pub fn fit(rows: &[Vec<f64>], y: &[f64], learning_rate: f64, l2: f64, epochs: usize) -> LogisticParams {
    let m = rows.first().map_or(0, Vec::len);
    let (mean, std): (Vec<f64>, Vec<f64>) = (0..m)
        .map(|j| mean_std(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .unzip();
    let z: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().enumerate().map(|(j, v)| (v - mean[j]) / std[j]).collect())
        .collect();
    let mut weights = vec![0.0; m];
    let mut bias = 0.0;
    for _ in 0..epochs {
        let (_, gw, gb) = loss_and_gradient(&z, y, &weights, bias, l2);
        for (w, g) in weights.iter_mut().zip(&gw) {
            *w -= learning_rate * g;
        }
        bias -= learning_rate * gb;
    }
    LogisticParams {
        mean,
        std,
        weights,
        bias,
    }
}
