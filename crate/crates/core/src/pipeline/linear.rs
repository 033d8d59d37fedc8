use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::dataset::{LabelVector, Matrix};

/// Ridge strength used when the unregularized system is singular.
pub const SINGULAR_FALLBACK_LAMBDA: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept
            + row
                .iter()
                .zip(&self.coefficients)
                .map(|(x, w)| x * w)
                .sum::<f64>()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.row_iter().map(|r| self.predict_row(r)).collect()
    }
}

/// Solves `(AᵀA + λD) β = Aᵀy` with `A = [1 | X]` and `D` the identity with
/// a zero in the intercept slot. `lambda = 0` is ordinary least squares;
/// a singular OLS system is retried with [`SINGULAR_FALLBACK_LAMBDA`].
pub fn fit_linear(x: &Matrix, y: &LabelVector, lambda: f64) -> Result<LinearModel, PipelineError> {
    let n = x.rows();
    let d = x.cols();
    let mut gram = DMatrix::<f64>::zeros(d + 1, d + 1);
    let mut rhs = DVector::<f64>::zeros(d + 1);
    let mut aug = vec![1.0; d + 1];
    for (r, &target) in y.values().iter().enumerate().take(n) {
        aug[1..].copy_from_slice(x.row(r));
        for i in 0..=d {
            rhs[i] += aug[i] * target;
            for j in 0..=i {
                gram[(i, j)] += aug[i] * aug[j];
            }
        }
    }
    for i in 0..=d {
        for j in 0..i {
            gram[(j, i)] = gram[(i, j)];
        }
    }

    let solve = |lambda: f64| -> Option<DVector<f64>> {
        let mut g = gram.clone();
        for i in 1..=d {
            g[(i, i)] += lambda;
        }
        let scale = (0..=d).map(|i| g[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
        let chol = g.cholesky()?;
        let l = chol.l_dirty();
        if (0..=d).any(|i| l[(i, i)] * l[(i, i)] <= 1e-13 * scale) {
            return None;
        }
        Some(chol.solve(&rhs))
    };

    let beta = solve(lambda)
        .or_else(|| {
            if lambda < SINGULAR_FALLBACK_LAMBDA {
                log::debug!("singular normal equations, retrying with ridge {SINGULAR_FALLBACK_LAMBDA}");
                solve(SINGULAR_FALLBACK_LAMBDA)
            } else {
                None
            }
        })
        .ok_or(PipelineError::Singular)?;

    Ok(LinearModel {
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
    })
}
