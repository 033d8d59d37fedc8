use serde::{Deserialize, Serialize};

use crate::dataset::Matrix;

/// Multinomial logistic regression. `weights` is row-major
/// `classes.len() x (features + 1)` with the bias in the last column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxModel {
    pub classes: Vec<u32>,
    pub features: usize,
    pub weights: Vec<f64>,
}

impl SoftmaxModel {
    pub fn zeros(classes: Vec<u32>, features: usize) -> Self {
        let weights = vec![0.0; classes.len() * (features + 1)];
        Self {
            classes,
            features,
            weights,
        }
    }

    pub fn logits(&self, row: &[f64], out: &mut [f64]) {
        logits(&self.weights, self.features, row, out);
    }

    pub fn probabilities(&self, row: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.classes.len()];
        self.logits(row, &mut z);
        softmax_in_place(&mut z);
        z
    }

    /// Arg-max class; equal logits resolve to the earliest (lowest) class.
    pub fn predict_row(&self, row: &[f64]) -> u32 {
        let mut z = vec![0.0; self.classes.len()];
        self.logits(row, &mut z);
        let mut best = 0;
        for (k, &v) in z.iter().enumerate() {
            if v > z[best] {
                best = k;
            }
        }
        self.classes[best]
    }

    pub fn predict(&self, x: &Matrix) -> Vec<u32> {
        x.row_iter().map(|r| self.predict_row(r)).collect()
    }
}

pub(crate) fn logits(weights: &[f64], features: usize, row: &[f64], out: &mut [f64]) {
    let stride = features + 1;
    for (k, z) in out.iter_mut().enumerate() {
        let w = &weights[k * stride..(k + 1) * stride];
        *z = w[features] + w[..features].iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
    }
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in z.iter_mut() {
        *v /= total;
    }
}

/// Mean cross-entropy and its gradient with respect to `weights`.
/// `targets` holds class positions (indices into the class list).
pub fn softmax_loss_gradient(
    weights: &[f64],
    n_classes: usize,
    x: &Matrix,
    targets: &[usize],
) -> (f64, Vec<f64>) {
    let d = x.cols();
    let stride = d + 1;
    let n = x.rows().max(1) as f64;
    let mut grad = vec![0.0; weights.len()];
    let mut loss = 0.0;
    let mut z = vec![0.0; n_classes];
    for (r, &t) in targets.iter().enumerate() {
        let row = x.row(r);
        logits(weights, d, row, &mut z);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - z[t];
        for k in 0..n_classes {
            let coeff = (z[k] - lse).exp() - if k == t { 1.0 } else { 0.0 };
            let g = &mut grad[k * stride..(k + 1) * stride];
            for (gj, xj) in g[..d].iter_mut().zip(row) {
                *gj += coeff * xj;
            }
            g[d] += coeff;
        }
    }
    for g in &mut grad {
        *g /= n;
    }
    (loss / n, grad)
}

/// Full-batch gradient descent on cross-entropy from zero weights.
pub fn fit_softmax(
    x: &Matrix,
    classes: &[u32],
    class_set: &[u32],
    learning_rate: f64,
    epochs: usize,
) -> SoftmaxModel {
    let targets: Vec<usize> = classes
        .iter()
        .map(|c| class_set.binary_search(c).unwrap_or(0))
        .collect();
    let mut model = SoftmaxModel::zeros(class_set.to_vec(), x.cols());
    for _ in 0..epochs {
        let (_, grad) = softmax_loss_gradient(&model.weights, class_set.len(), x, &targets);
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= learning_rate * g;
        }
    }
    model
}
