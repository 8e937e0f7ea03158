use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use super::LimeConfig;
use crate::error::{check_dim, Error, Result};
use crate::linalg::solve_psd;
use crate::models::Model;
use crate::seed;

/// Local surrogate in the continuous feature space.
///
/// Draws `x' = x + z`, `z ~ N(0, perturb_std^2 I)`, weights each draw by
/// `exp(-|z|^2 / width^2)` and fits a weighted ridge regression of
/// `h(x')` on `x'` with an unpenalized intercept. Returns the slopes.
pub fn explain_lime(model: &dyn Model, x: &[f64], cfg: &LimeConfig, seed: u64) -> Result<Vec<f64>> {
    let d = model.input_dim();
    check_dim(d, x.len())?;
    if cfg.samples == 0 {
        return Err(Error::Config("lime samples must be >= 1".into()));
    }
    if cfg.ridge_penalty <= 0.0 && cfg.samples < d + 1 {
        return Err(Error::Config(format!(
            "lime without ridge needs at least {} samples",
            d + 1
        )));
    }
    let width = cfg.kernel_width_for(d);
    if !(width > 0.0) {
        return Err(Error::Config("lime kernel_width must be > 0".into()));
    }

    let n = cfg.samples;
    let mut rng = seed::rng(seed);
    let mut z = Array2::<f64>::zeros((n, d));
    for v in z.iter_mut() {
        let e: f64 = rng.sample(StandardNormal);
        *v = cfg.perturb_std * e;
    }
    let pts = &z + &ndarray::ArrayView1::from(x);
    let y = model.predict_proba_batch(pts.view())?;
    let weights: Vec<f64> = z
        .rows()
        .into_iter()
        .map(|r| (-r.dot(&r) / (width * width)).exp())
        .collect();

    let wsum: f64 = weights.iter().sum();
    if !(wsum > 0.0) {
        return Err(Error::Singular(
            "all lime kernel weights underflowed".into(),
        ));
    }
    // Weighted centering removes the intercept from the penalized system.
    let mut xbar = vec![0.0; d];
    let mut ybar = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        for j in 0..d {
            xbar[j] += w * pts[[i, j]];
        }
        ybar += w * y[i];
    }
    xbar.iter_mut().for_each(|v| *v /= wsum);
    ybar /= wsum;

    let mut a = DMatrix::<f64>::zeros(d, d);
    let mut b = DVector::<f64>::zeros(d);
    let mut centered = vec![0.0; d];
    for (i, &w) in weights.iter().enumerate() {
        for j in 0..d {
            centered[j] = pts[[i, j]] - xbar[j];
        }
        let r = y[i] - ybar;
        for j in 0..d {
            let wc = w * centered[j];
            b[j] += wc * r;
            for k in 0..=j {
                a[(j, k)] += wc * centered[k];
            }
        }
    }
    for j in 0..d {
        for k in 0..j {
            a[(k, j)] = a[(j, k)];
        }
        a[(j, j)] += cfg.ridge_penalty.max(0.0);
    }
    let slopes = solve_psd(a, &b)?;
    Ok(slopes.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant(usize, f64);

    impl Model for Constant {
        fn input_dim(&self) -> usize {
            self.0
        }
        fn predict_proba(&self, _x: &[f64]) -> Result<f64> {
            Ok(self.1)
        }
        fn input_gradient(&self, _x: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![0.0; self.0])
        }
    }

    #[test]
    fn constant_model_has_zero_slopes() {
        let w = explain_lime(
            &Constant(3, 0.7),
            &[0.1, 0.2, 0.3],
            &LimeConfig::default(),
            1,
        )
        .unwrap();
        assert!(w.iter().all(|v| v.abs() < 1e-9), "{w:?}");
    }

    #[test]
    fn seeded() {
        let m = crate::models::LinearModel::new(vec![1.0, -0.5], 0.2);
        let cfg = LimeConfig {
            samples: 300,
            ..LimeConfig::default()
        };
        let a = explain_lime(&m, &[0.3, 0.1], &cfg, 4).unwrap();
        assert_eq!(a, explain_lime(&m, &[0.3, 0.1], &cfg, 4).unwrap());
        assert_ne!(a, explain_lime(&m, &[0.3, 0.1], &cfg, 5).unwrap());
    }
}
