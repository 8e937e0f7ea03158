use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView2};

use super::{check_labels, logistic, Model, TrainConfig};
use crate::error::{check_dim, Result};
use crate::linalg::solve_psd;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn new(coefficients: Vec<f64>, intercept: f64) -> Self {
        Self {
            coefficients,
            intercept,
        }
    }

    #[inline]
    fn logit(&self, x: &[f64]) -> f64 {
        self.coefficients
            .iter()
            .zip(x)
            .fold(self.intercept, |acc, (w, v)| acc + w * v)
    }

    /// `|coefficient_j|` for every feature.
    pub fn ground_truth_weights(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.abs()).collect()
    }
}

impl Model for LinearModel {
    fn input_dim(&self) -> usize {
        self.coefficients.len()
    }

    fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.input_dim(), x.len())?;
        Ok(logistic(self.logit(x)))
    }

    /// `h(x) (1 - h(x)) * coefficients`.
    fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let h = self.predict_proba(x)?;
        let s = h * (1.0 - h);
        Ok(self.coefficients.iter().map(|w| s * w).collect())
    }

    fn predict_proba_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        check_dim(self.input_dim(), xs.ncols())?;
        Ok(xs
            .rows()
            .into_iter()
            .map(|r| logistic(self.logit(r.as_slice().unwrap_or(&r.to_vec()))))
            .collect())
    }

    fn input_gradient_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let p = self.predict_proba_batch(xs)?;
        let d = self.input_dim();
        Ok(Array2::from_shape_fn((xs.nrows(), d), |(i, j)| {
            p[i] * (1.0 - p[i]) * self.coefficients[j]
        }))
    }
}

#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn penalized_loss(x: ArrayView2<'_, f64>, y: &[u8], theta: &DVector<f64>, l2: f64) -> f64 {
    let d = x.ncols();
    let n = x.nrows() as f64;
    let mut total = 0.0;
    for (row, &yi) in x.rows().into_iter().zip(y) {
        let z = row
            .iter()
            .zip(theta.iter())
            .fold(theta[d], |a, (v, w)| a + v * w);
        total += softplus(z) - f64::from(yi) * z;
    }
    let wn: f64 = theta.rows(0, d).iter().map(|w| w * w).sum();
    total / n + 0.5 * l2 * wn
}

/// L2-penalized logistic regression fitted by damped Newton iterations.
///
/// Minimizes mean binary cross entropy plus `l2/2 * |w|^2` (intercept
/// unpenalized). Stops when the gradient norm drops to `cfg.tolerance` or
/// after `cfg.epochs` iterations.
pub fn train_logistic(x: ArrayView2<'_, f64>, y: &[u8], cfg: &TrainConfig) -> Result<LinearModel> {
    cfg.validate()?;
    check_labels(x, y)?;
    let (n, d) = x.dim();
    let nf = n as f64;
    let l2 = cfg.l2_penalty;
    let mut theta = DVector::<f64>::zeros(d + 1);
    let mut loss = penalized_loss(x, y, &theta, l2);

    for _ in 0..cfg.epochs {
        let mut grad = DVector::<f64>::zeros(d + 1);
        let mut hess = DMatrix::<f64>::zeros(d + 1, d + 1);
        for (row, &yi) in x.rows().into_iter().zip(y) {
            let z = row
                .iter()
                .zip(theta.iter())
                .fold(theta[d], |a, (v, w)| a + v * w);
            let p = logistic(z);
            let r = p - f64::from(yi);
            let s = p * (1.0 - p);
            for j in 0..d {
                grad[j] += r * row[j];
                for k in 0..=j {
                    hess[(j, k)] += s * row[j] * row[k];
                }
                hess[(d, j)] += s * row[j];
            }
            grad[d] += r;
            hess[(d, d)] += s;
        }
        grad /= nf;
        hess /= nf;
        for j in 0..d {
            grad[j] += l2 * theta[j];
            hess[(j, j)] += l2;
        }
        for j in 0..=d {
            for k in 0..j {
                hess[(k, j)] = hess[(j, k)];
            }
        }
        if grad.norm() <= cfg.tolerance {
            break;
        }
        let step = match solve_psd(hess, &(-&grad)) {
            Ok(s) if s.dot(&grad) < 0.0 => s,
            _ => -&grad,
        };
        let slope = step.dot(&grad);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &theta + &step * t;
            let cand_loss = penalized_loss(x, y, &cand, l2);
            if cand_loss <= loss + 1e-4 * t * slope {
                theta = cand;
                loss = cand_loss;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(LinearModel::new(
        theta.rows(0, d).iter().copied().collect(),
        theta[d],
    ))
}
