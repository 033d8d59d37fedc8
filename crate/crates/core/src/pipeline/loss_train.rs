//! Gradient-descent training driven by a guest-supplied loss.
//!
//! Regression fits a linear model `p = w·x + b` on the mean per-sample loss.
//! Classification fits softmax weights; the loss is applied to each class
//! probability against the one-hot target and summed over classes. Both
//! start from zero weights and take `epochs` full-batch steps using the
//! learning rate of the configured `softmax_regression` model.

use thiserror::Error;

use super::softmax::{logits, softmax_in_place};
use super::{LinearModel, ReferenceModelConfig, SoftmaxModel, TrainedModel};
use crate::dataset::{LabelKind, LabelVector, Matrix};
use crate::loss::{LossError, LossFunction};

#[derive(Debug, Error, PartialEq)]
pub enum LossTrainingError {
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("{0}")]
    Config(String),
}

pub fn train_with_loss(
    cfg: &ReferenceModelConfig,
    loss: &LossFunction,
    x: &Matrix,
    y: &LabelVector,
) -> Result<TrainedModel, LossTrainingError> {
    let ReferenceModelConfig::SoftmaxRegression {
        learning_rate,
        epochs,
        ..
    } = cfg
    else {
        return Err(LossTrainingError::Config(
            "loss-specification challenges need a softmax_regression optimizer config".into(),
        ));
    };
    match y.kind() {
        LabelKind::Continuous => {
            train_linear(loss, x, y.values(), *learning_rate, *epochs).map(TrainedModel::Linear)
        }
        LabelKind::Categorical => {
            train_softmax(loss, x, y, *learning_rate, *epochs).map(TrainedModel::Softmax)
        }
    }
}

fn train_linear(
    loss: &LossFunction,
    x: &Matrix,
    y: &[f64],
    learning_rate: f64,
    epochs: usize,
) -> Result<LinearModel, LossTrainingError> {
    let d = x.cols();
    let n = x.rows() as f64;
    let mut model = LinearModel {
        coefficients: vec![0.0; d],
        intercept: 0.0,
    };
    let mut grad = vec![0.0; d + 1];
    for _ in 0..epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (r, &target) in y.iter().enumerate() {
            let row = x.row(r);
            let g = loss.derivative(target, model.predict_row(row))?;
            for (gj, xj) in grad[..d].iter_mut().zip(row) {
                *gj += g * xj;
            }
            grad[d] += g;
        }
        for (w, g) in model.coefficients.iter_mut().zip(&grad[..d]) {
            *w -= learning_rate * g / n;
        }
        model.intercept -= learning_rate * grad[d] / n;
    }
    let predictions = model.predict(x);
    loss.mean(y, &predictions)?;
    Ok(model)
}

fn train_softmax(
    loss: &LossFunction,
    x: &Matrix,
    y: &LabelVector,
    learning_rate: f64,
    epochs: usize,
) -> Result<SoftmaxModel, LossTrainingError> {
    let d = x.cols();
    let stride = d + 1;
    let n = x.rows() as f64;
    let class_set = y.class_set().to_vec();
    let k = class_set.len();
    let targets: Vec<usize> = y
        .classes()
        .map(|c| class_set.binary_search(&c).unwrap_or(0))
        .collect();
    let mut model = SoftmaxModel::zeros(class_set, d);
    let mut grad = vec![0.0; model.weights.len()];
    let mut probs = vec![0.0; k];
    let mut dloss = vec![0.0; k];

    let mut step = |model: &mut SoftmaxModel, apply: bool| -> Result<f64, LossTrainingError> {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            let row = x.row(r);
            logits(&model.weights, d, row, &mut probs);
            softmax_in_place(&mut probs);
            let mut weighted = 0.0;
            for j in 0..k {
                let target = if j == t { 1.0 } else { 0.0 };
                total += loss.value(target, probs[j])?;
                dloss[j] = loss.derivative(target, probs[j])?;
                weighted += dloss[j] * probs[j];
            }
            if !apply {
                continue;
            }
            // dL/dz_j = p_j (g_j - sum_k g_k p_k)
            for j in 0..k {
                let coeff = probs[j] * (dloss[j] - weighted);
                let g = &mut grad[j * stride..(j + 1) * stride];
                for (gj, xj) in g[..d].iter_mut().zip(row) {
                    *gj += coeff * xj;
                }
                g[d] += coeff;
            }
        }
        if apply {
            for (w, g) in model.weights.iter_mut().zip(&grad) {
                *w -= learning_rate * g / n;
            }
        }
        Ok(total / n)
    };

    for _ in 0..epochs {
        step(&mut model, true)?;
    }
    step(&mut model, false)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::fit_linear;

    fn gd(lr: f64, epochs: usize) -> ReferenceModelConfig {
        ReferenceModelConfig::SoftmaxRegression {
            learning_rate: lr,
            epochs,
            seed: 0,
        }
    }

    #[test]
    fn squared_error_matches_closed_form() {
        let x = Matrix::new(6, 2, vec![-1.0, 0.5, 0.0, -1.0, 1.0, 1.0, 0.5, 0.0, -0.5, -0.5, 1.5, -0.2]).unwrap();
        let y = LabelVector::continuous(vec![0.3, -1.2, 2.8, 1.1, -0.4, 2.2]).unwrap();
        let loss = LossFunction::parse("(y - p)^2").unwrap();
        let TrainedModel::Linear(m) = train_with_loss(&gd(0.2, 4000), &loss, &x, &y).unwrap() else {
            panic!("expected linear model");
        };
        let ols = fit_linear(&x, &y, 0.0).unwrap();
        for (a, b) in m.coefficients.iter().zip(&ols.coefficients) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert!((m.intercept - ols.intercept).abs() < 1e-6);
    }

    #[test]
    fn cross_entropy_classifies_separable_data() {
        let x = Matrix::new(4, 1, vec![-2.0, -1.0, 1.0, 2.0]).unwrap();
        let y = LabelVector::from_classes(&[0, 0, 1, 1]);
        let loss = LossFunction::parse("-(y*log(p) + (1-y)*log(1-p))").unwrap();
        let TrainedModel::Softmax(m) = train_with_loss(&gd(0.5, 300), &loss, &x, &y).unwrap() else {
            panic!("expected softmax model");
        };
        assert_eq!(m.predict(&x), vec![0, 0, 1, 1]);
    }

    #[test]
    fn non_finite_loss_fails() {
        let x = Matrix::new(2, 1, vec![0.0, 1.0]).unwrap();
        let y = LabelVector::continuous(vec![0.0, 1.0]).unwrap();
        let loss = LossFunction::parse("1 / (p - p)").unwrap();
        assert!(matches!(
            train_with_loss(&gd(0.1, 3), &loss, &x, &y),
            Err(LossTrainingError::Loss(_))
        ));
    }

    #[test]
    fn requires_optimizer_config() {
        let x = Matrix::new(2, 1, vec![0.0, 1.0]).unwrap();
        let y = LabelVector::continuous(vec![0.0, 1.0]).unwrap();
        let loss = LossFunction::parse("(y-p)^2").unwrap();
        assert!(matches!(
            train_with_loss(&ReferenceModelConfig::Ols, &loss, &x, &y),
            Err(LossTrainingError::Config(_))
        ));
    }
}
