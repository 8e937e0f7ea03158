use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::Rng;

use super::KernelShapConfig;
use crate::error::{check_dim, Error, Result};
use crate::linalg::solve_psd;
use crate::models::Model;
use crate::seed;

/// Shapley kernel `(d-1) / (C(d,s) * s * (d-s))` for a coalition of size `s`.
pub fn shapley_kernel_weight(d: usize, s: usize) -> f64 {
    assert!(
        s > 0 && s < d,
        "kernel is defined for proper nonempty coalitions"
    );
    (d as f64 - 1.0) / (binomial(d, s) * s as f64 * (d - s) as f64)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Coalitions as membership masks with their regression weights.
fn coalitions(d: usize, cfg: &KernelShapConfig, seed: u64) -> (Vec<Vec<bool>>, Vec<f64>) {
    let proper = if d < 63 { (1u64 << d) - 2 } else { u64::MAX };
    if (cfg.samples as u64) >= proper {
        let mut masks = Vec::with_capacity(proper as usize);
        let mut weights = Vec::with_capacity(proper as usize);
        for bits in 1..(1u64 << d) - 1 {
            let mask: Vec<bool> = (0..d).map(|j| bits >> j & 1 == 1).collect();
            let s = mask.iter().filter(|&&b| b).count();
            masks.push(mask);
            weights.push(shapley_kernel_weight(d, s));
        }
        return (masks, weights);
    }

    // Size s carries total kernel mass (d-1)/(s(d-s)); within a size all
    // subsets are equally likely.
    let size_mass: Vec<f64> = (1..d)
        .map(|s| (d as f64 - 1.0) / (s as f64 * (d - s) as f64))
        .collect();
    let total: f64 = size_mass.iter().sum();
    let mut rng = seed::rng(seed);
    let mut masks = Vec::with_capacity(cfg.samples);
    for _ in 0..cfg.samples {
        let mut u = rng.random::<f64>() * total;
        let mut size = d - 1;
        for (i, m) in size_mass.iter().enumerate() {
            if u < *m {
                size = i + 1;
                break;
            }
            u -= m;
        }
        let mut mask = vec![false; d];
        for j in rand::seq::index::sample(&mut rng, d, size) {
            mask[j] = true;
        }
        masks.push(mask);
    }
    (masks, vec![1.0; cfg.samples])
}

/// Kernel SHAP against a single background point.
///
/// Features in a coalition take `x`'s values, the rest take the
/// background's. Attributions solve the Shapley-kernel weighted least
/// squares problem subject to `sum(phi) = h(x) - h(background)`; the
/// constraint is imposed by eliminating the last feature.
pub fn explain_kernelshap(
    model: &dyn Model,
    x: &[f64],
    cfg: &KernelShapConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let d = model.input_dim();
    check_dim(d, x.len())?;
    let background = cfg
        .background
        .as_deref()
        .ok_or_else(|| Error::Config("kernelshap needs a background vector".into()))?;
    check_dim(d, background.len())?;
    if cfg.samples == 0 {
        return Err(Error::Config("kernelshap samples must be >= 1".into()));
    }
    let v_empty = model.predict_proba(background)?;
    let v_full = model.predict_proba(x)?;
    let delta = v_full - v_empty;
    if d == 1 {
        return Ok(vec![delta]);
    }

    let (masks, weights) = coalitions(d, cfg, seed);
    let inputs = Array2::from_shape_fn((masks.len(), d), |(i, j)| {
        if masks[i][j] {
            x[j]
        } else {
            background[j]
        }
    });
    let values = model.predict_proba_batch(inputs.view())?;

    let p = d - 1;
    let mut a = DMatrix::<f64>::zeros(p, p);
    let mut b = DVector::<f64>::zeros(p);
    let mut row = vec![0.0; p];
    for (i, mask) in masks.iter().enumerate() {
        let last = if mask[p] { 1.0 } else { 0.0 };
        for j in 0..p {
            row[j] = if mask[j] { 1.0 } else { 0.0 } - last;
        }
        let target = values[i] - v_empty - last * delta;
        let w = weights[i];
        for j in 0..p {
            if row[j] == 0.0 {
                continue;
            }
            let wr = w * row[j];
            b[j] += wr * target;
            for k in 0..=j {
                a[(j, k)] += wr * row[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            a[(k, j)] = a[(j, k)];
        }
    }
    let head = solve_psd(a, &b)?;
    let mut phi: Vec<f64> = head.iter().copied().collect();
    phi.push(delta - phi.iter().sum::<f64>());
    Ok(phi)
}
