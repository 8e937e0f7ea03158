//! Two-sided Mann-Whitney U test for group disparity.
//!
//! Ranks are mid-ranks. Internally every rank is doubled so tied ranks stay
//! integers and the permutation distribution is compared exactly.
//!
//! When the pooled sample admits at most [`EXHAUSTIVE_LIMIT`] labelings the
//! null distribution is enumerated in full; this covers the exact test for
//! tie-free samples with `n0 + n1 <= 16`. Beyond that, [`MONTE_CARLO_PERMUTATIONS`]
//! seeded random relabelings are used and the tie- and continuity-corrected
//! normal approximation is reported alongside.

use itertools::Itertools;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::seed::{self, mix64, stream};

pub const EXHAUSTIVE_LIMIT: u128 = 12_870;
pub const MONTE_CARLO_PERMUTATIONS: usize = 100_000;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    /// Full enumeration of group labelings.
    Exact,
    /// Random relabelings; see `normal_p_value` for the asymptotic value.
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisparityResult {
    /// U of the first sample: pairs `(a_i, b_j)` with `a_i > b_j`, ties counting 1/2.
    pub u_statistic: f64,
    pub p_value: f64,
    pub significant: bool,
    pub alpha: f64,
    pub n0: usize,
    pub n1: usize,
    pub method: TestMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal_p_value: Option<f64>,
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Doubled mid-ranks of the pooled sample, in input order, plus tie group sizes.
fn doubled_midranks(pooled: &[f64]) -> (Vec<i64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0i64; pooled.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && pooled[order[end + 1]] == pooled[order[start]] {
            end += 1;
        }
        // positions start..=end share rank (start + end + 2) / 2
        let doubled = (start + end + 2) as i64;
        for &i in &order[start..=end] {
            ranks[i] = doubled;
        }
        ties.push(end - start + 1);
        start = end + 1;
    }
    (ranks, ties)
}

fn two_sided(le: f64, ge: f64, total: f64) -> f64 {
    (2.0 * le.min(ge) / total).min(1.0)
}

fn normal_p_value(u: f64, n0: usize, n1: usize, ties: &[usize]) -> f64 {
    let (a, b) = (n0 as f64, n1 as f64);
    let n = a + b;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
    let var = a * b / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)).max(1.0));
    if !(var > 0.0) {
        return 1.0;
    }
    let z = ((u - a * b / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * (1.0 - normal.cdf(z))).min(1.0)
}

/// Two-sided Mann-Whitney U test with the default permutation seed.
pub fn mann_whitney_u(a: &[f64], b: &[f64], alpha: f64) -> Result<DisparityResult> {
    mann_whitney_u_seeded(a, b, alpha, 0)
}

/// Two-sided Mann-Whitney U test; `seed` only matters on the Monte-Carlo path.
pub fn mann_whitney_u_seeded(
    a: &[f64],
    b: &[f64],
    alpha: f64,
    seed: u64,
) -> Result<DisparityResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Input(
            "Mann-Whitney U needs two nonempty samples".into(),
        ));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Input("samples must be finite".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha = {alpha} not in (0, 1)")));
    }
    let (n0, n1) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = doubled_midranks(&pooled);
    let offset = (n0 * (n0 + 1)) as i64;
    let observed: i64 = ranks[..n0].iter().sum::<i64>() - offset;
    let u_statistic = observed as f64 / 2.0;

    let labelings = binomial(n0 + n1, n0);
    let (p_value, method, normal) = if labelings <= EXHAUSTIVE_LIMIT {
        let (mut le, mut ge) = (0u64, 0u64);
        for combo in (0..n0 + n1).combinations(n0) {
            let u2 = combo.iter().map(|&i| ranks[i]).sum::<i64>() - offset;
            le += u64::from(u2 <= observed);
            ge += u64::from(u2 >= observed);
        }
        (
            two_sided(le as f64, ge as f64, labelings as f64),
            TestMethod::Exact,
            None,
        )
    } else {
        let mut rng = seed::rng(mix64(&[seed, stream::PERMUTATION]));
        let mut shuffled = ranks.clone();
        let (mut le, mut ge) = (1u64, 1u64);
        for _ in 0..MONTE_CARLO_PERMUTATIONS {
            shuffled.shuffle(&mut rng);
            let u2 = shuffled[..n0].iter().sum::<i64>() - offset;
            le += u64::from(u2 <= observed);
            ge += u64::from(u2 >= observed);
        }
        let total = (MONTE_CARLO_PERMUTATIONS + 1) as f64;
        (
            two_sided(le as f64, ge as f64, total),
            TestMethod::MonteCarlo,
            Some(normal_p_value(u_statistic, n0, n1, &ties)),
        )
    };
    Ok(DisparityResult {
        u_statistic,
        p_value,
        significant: p_value < alpha,
        alpha,
        n0,
        n1,
        method,
        normal_p_value: normal,
    })
}

/// Mann-Whitney U on per-trial group means; both vectors must have one
/// entry per trial.
pub fn test_disparity(
    m0_means: &[f64],
    m1_means: &[f64],
    trials: usize,
    alpha: f64,
) -> Result<DisparityResult> {
    test_disparity_seeded(m0_means, m1_means, trials, alpha, 0)
}

/// [`test_disparity`] with an explicit permutation seed.
pub fn test_disparity_seeded(
    m0_means: &[f64],
    m1_means: &[f64],
    trials: usize,
    alpha: f64,
    seed: u64,
) -> Result<DisparityResult> {
    if m0_means.len() != trials || m1_means.len() != trials {
        return Err(Error::Protocol(format!(
            "expected {trials} per-trial means per group, got {} and {}",
            m0_means.len(),
            m1_means.len()
        )));
    }
    mann_whitney_u_seeded(m0_means, m1_means, alpha, seed)
}
