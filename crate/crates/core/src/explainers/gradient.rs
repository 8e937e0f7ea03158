use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{IntGradConfig, SmoothGradConfig};
use crate::error::{check_dim, Error, Result};
use crate::models::Model;
use crate::seed;

/// Rows per batched gradient evaluation.
const CHUNK: usize = 256;

/// `dh/dx` at `x`.
pub fn explain_vanilla_grad(model: &dyn Model, x: &[f64]) -> Result<Vec<f64>> {
    model.input_gradient(x)
}

/// Mean gradient over `samples` Gaussian-perturbed copies of `x`.
///
/// `noise_std == 0` returns the vanilla gradient exactly.
pub fn explain_smoothgrad(
    model: &dyn Model,
    x: &[f64],
    cfg: &SmoothGradConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    if cfg.noise_std < 0.0 || !cfg.noise_std.is_finite() {
        return Err(Error::Config("smoothgrad noise_std must be >= 0".into()));
    }
    if cfg.samples == 0 {
        return Err(Error::Config("smoothgrad samples must be >= 1".into()));
    }
    check_dim(model.input_dim(), x.len())?;
    if cfg.noise_std == 0.0 {
        return explain_vanilla_grad(model, x);
    }
    let d = x.len();
    let mut rng = seed::rng(seed);
    let mut sum = Array1::<f64>::zeros(d);
    let mut remaining = cfg.samples;
    while remaining > 0 {
        let rows = remaining.min(CHUNK);
        let pts = Array2::from_shape_fn((rows, d), |(_, j)| {
            let z: f64 = rng.sample(StandardNormal);
            x[j] + cfg.noise_std * z
        });
        let grads = model.input_gradient_batch(pts.view())?;
        for row in grads.rows() {
            sum += &row;
        }
        remaining -= rows;
    }
    Ok((sum / cfg.samples as f64).to_vec())
}

/// Integrated gradients along the straight path from the baseline,
/// midpoint Riemann sum with `cfg.steps` nodes.
pub fn explain_intgrad(model: &dyn Model, x: &[f64], cfg: &IntGradConfig) -> Result<Vec<f64>> {
    if cfg.steps == 0 {
        return Err(Error::Config("intgrad steps must be >= 1".into()));
    }
    let d = model.input_dim();
    check_dim(d, x.len())?;
    let zeros = vec![0.0; d];
    let baseline = cfg.baseline.as_deref().unwrap_or(&zeros);
    check_dim(d, baseline.len())?;
    let delta: Vec<f64> = x.iter().zip(baseline).map(|(a, b)| a - b).collect();
    if delta.iter().all(|&v| v == 0.0) {
        return Ok(vec![0.0; d]);
    }
    let steps = cfg.steps;
    let mut sum = Array1::<f64>::zeros(d);
    let mut start = 0;
    while start < steps {
        let rows = (steps - start).min(CHUNK);
        let pts = Array2::from_shape_fn((rows, d), |(r, j)| {
            let alpha = ((start + r) as f64 + 0.5) / steps as f64;
            baseline[j] + alpha * delta[j]
        });
        let grads = model.input_gradient_batch(pts.view())?;
        for row in grads.rows() {
            sum += &row;
        }
        start += rows;
    }
    Ok(sum
        .iter()
        .zip(&delta)
        .map(|(g, dx)| dx * g / steps as f64)
        .collect())
}
