//! Independent reference implementations used across the integration tests.
#![allow(dead_code)]

use xaudit::models::Model;

/// Two-sided Mann-Whitney p-value by brute force over group labelings.
///
/// U is counted pairwise (ties 1/2), not via ranks, and labelings are
/// enumerated as bitmasks.
pub fn mwu_bitmask_oracle(a: &[f64], b: &[f64]) -> (f64, f64) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    assert!(n <= 20);
    let n0 = a.len();
    let u_of = |mask: u32| -> f64 {
        let mut u = 0.0;
        for i in 0..n {
            if mask & (1 << i) == 0 {
                continue;
            }
            for j in 0..n {
                if mask & (1 << j) != 0 {
                    continue;
                }
                if pooled[i] > pooled[j] {
                    u += 1.0;
                } else if pooled[i] == pooled[j] {
                    u += 0.5;
                }
            }
        }
        u
    };
    let observed = u_of((1u32 << n0) - 1);
    let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n0 {
            continue;
        }
        let u = u_of(mask);
        total += 1;
        le += u64::from(u <= observed + 1e-9);
        ge += u64::from(u >= observed - 1e-9);
    }
    let p = (2.0 * le.min(ge) as f64 / total as f64).min(1.0);
    (observed, p)
}

/// Exact Shapley values of `v(S) = f(x_S, background_{not S})` by enumerating
/// all `2^d` coalitions with the factorial weights.
pub fn brute_force_shapley(model: &dyn Model, x: &[f64], background: &[f64]) -> Vec<f64> {
    let d = x.len();
    let value = |mask: usize| -> f64 {
        let z: Vec<f64> = (0..d)
            .map(|j| if mask & (1 << j) != 0 { x[j] } else { background[j] })
            .collect();
        model.predict_proba(&z).unwrap()
    };
    let values: Vec<f64> = (0..1usize << d).map(value).collect();
    let fact = |k: usize| -> f64 { (1..=k).map(|i| i as f64).product() };
    let mut phi = vec![0.0; d];
    for (j, p) in phi.iter_mut().enumerate() {
        for mask in 0..1usize << d {
            if mask & (1 << j) != 0 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let w = fact(s) * fact(d - s - 1) / fact(d);
            *p += w * (values[mask | (1 << j)] - values[mask]);
        }
    }
    phi
}

/// Central finite-difference gradient of `predict_proba`.
pub fn central_difference(model: &dyn Model, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[j] += h;
            down[j] -= h;
            (model.predict_proba(&up).unwrap() - model.predict_proba(&down).unwrap()) / (2.0 * h)
        })
        .collect()
}

pub fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// One row of the published p-value grid fixture.
#[derive(Debug, Clone, serde::Deserialize)]
pub struct PublishedCell {
    pub dataset: String,
    pub model: String,
    pub method: String,
    pub metric: String,
    pub p_value: f64,
    pub bold: bool,
}

pub fn published_grid() -> Vec<PublishedCell> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/published_table1.csv");
    csv::Reader::from_path(path)
        .unwrap()
        .deserialize()
        .collect::<Result<Vec<PublishedCell>, _>>()
        .unwrap()
}

pub fn grid_cells(cells: &[PublishedCell]) -> Vec<xaudit::harness::GridCell> {
    cells
        .iter()
        .map(|c| xaudit::harness::GridCell {
            dataset: c.dataset.clone(),
            model: c.model.clone(),
            method: c.method.clone(),
            metric: c.metric.clone(),
            p_value: Some(c.p_value),
        })
        .collect()
}
