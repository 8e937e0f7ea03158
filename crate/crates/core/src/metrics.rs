//! Explanation-quality estimators.
//!
//! All five are empirical (sample-mean) estimators evaluated per instance.
//! Importance magnitude means `|w_i|` unless `signed_importances` is set,
//! in which case the raw signed values are ranked and thresholded.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::models::Model;
use crate::seed::{self, mix64, stream};

/// An explainer bound to a model: `(x, seed) -> w`.
pub type ExplainFn<'a> = dyn Fn(&[f64], u64) -> Result<Vec<f64>> + Sync + 'a;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    GroundTruthFidelity,
    PredictionGap,
    Complexity,
    Instability,
    Inconsistency,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::GroundTruthFidelity,
        Metric::PredictionGap,
        Metric::Complexity,
        Metric::Instability,
        Metric::Inconsistency,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::GroundTruthFidelity => "ground_truth_fidelity",
            Metric::PredictionGap => "prediction_gap",
            Metric::Complexity => "complexity",
            Metric::Instability => "instability",
            Metric::Inconsistency => "inconsistency",
        }
    }

    /// Only defined for models with intrinsic importances.
    pub fn needs_linear_model(self) -> bool {
        self == Metric::GroundTruthFidelity
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .or(match s {
                "ground_truth" => Some(Metric::GroundTruthFidelity),
                "sparsity" => Some(Metric::Complexity),
                "stability" => Some(Metric::Instability),
                "consistency" => Some(Metric::Inconsistency),
                _ => None,
            })
            .ok_or_else(|| Error::Config(format!("unknown metric `{s}`")))
    }
}

fn d_k() -> usize {
    5
}
fn d_m_gap() -> usize {
    1000
}
fn d_sigma() -> f64 {
    0.1
}
fn d_m_rep() -> usize {
    5
}
fn d_t() -> f64 {
    0.01
}
fn d_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    #[serde(default = "d_k")]
    pub k: usize,
    #[serde(default = "d_m_gap")]
    pub m_pred_gap: usize,
    #[serde(default = "d_sigma")]
    pub sigma: f64,
    #[serde(default = "d_m_rep")]
    pub m_stability: usize,
    #[serde(default = "d_m_rep")]
    pub m_consistency: usize,
    #[serde(default = "d_t")]
    pub t: f64,
    /// Rank and threshold raw signed importances instead of magnitudes.
    #[serde(default)]
    pub signed_importances: bool,
    /// Perturb one-hot columns in the prediction-gap estimator.
    #[serde(default = "d_true")]
    pub noise_on_onehot: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            k: d_k(),
            m_pred_gap: d_m_gap(),
            sigma: d_sigma(),
            m_stability: d_m_rep(),
            m_consistency: d_m_rep(),
            t: d_t(),
            signed_importances: false,
            noise_on_onehot: true,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.k == 0 || self.k > d {
            return Err(Error::Config(format!("k = {} must be in 1..={d}", self.k)));
        }
        if self.m_pred_gap == 0 || self.m_stability == 0 || self.m_consistency == 0 {
            return Err(Error::Config("metric sample counts must be >= 1".into()));
        }
        if !(self.sigma >= 0.0) || !(self.t >= 0.0) {
            return Err(Error::Config("sigma and t must be >= 0".into()));
        }
        Ok(())
    }
}

#[inline]
fn importance_key(v: f64, signed: bool) -> f64 {
    if signed {
        v
    } else {
        v.abs()
    }
}

/// Indices of the `k` most important entries, most important first.
///
/// Ties go to the smaller index.
pub fn top_k_indices(v: &[f64], k: usize, signed: bool) -> Result<Vec<usize>> {
    if k == 0 || k > v.len() {
        return Err(Error::Config(format!("k = {k} must be in 1..={}", v.len())));
    }
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| {
        importance_key(v[b], signed)
            .total_cmp(&importance_key(v[a], signed))
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    Ok(idx)
}

/// `|top_k(w) ∩ top_k(omega)| / k`.
pub fn ground_truth_fidelity(w: &[f64], omega: &[f64], k: usize, signed: bool) -> Result<f64> {
    check_dim(omega.len(), w.len())?;
    let a: BTreeSet<usize> = top_k_indices(w, k, signed)?.into_iter().collect();
    let b: BTreeSet<usize> = top_k_indices(omega, k, signed)?.into_iter().collect();
    Ok(a.intersection(&b).count() as f64 / k as f64)
}

/// Mean `|h(x) - h(x~)|` where `x~` adds `N(0, sigma^2)` noise to every
/// coordinate outside `top_k(w)`.
pub fn prediction_gap(
    model: &dyn Model,
    x: &[f64],
    w: &[f64],
    cfg: &MetricConfig,
    seed: u64,
) -> Result<f64> {
    prediction_gap_masked(model, x, w, cfg, seed, None)
}

/// [`prediction_gap`] restricted to coordinates flagged in `perturbable`.
///
/// The noise stream always draws `d` values per sample, so masking a
/// column does not shift the noise seen by the others.
pub fn prediction_gap_masked(
    model: &dyn Model,
    x: &[f64],
    w: &[f64],
    cfg: &MetricConfig,
    seed: u64,
    perturbable: Option<&[bool]>,
) -> Result<f64> {
    let d = model.input_dim();
    check_dim(d, x.len())?;
    check_dim(d, w.len())?;
    if let Some(p) = perturbable {
        check_dim(d, p.len())?;
    }
    if cfg.m_pred_gap == 0 || !(cfg.sigma >= 0.0) {
        return Err(Error::Config(
            "prediction gap needs m >= 1 and sigma >= 0".into(),
        ));
    }
    let top = top_k_indices(w, cfg.k, cfg.signed_importances)?;
    let mut noisy = vec![true; d];
    for &i in &top {
        noisy[i] = false;
    }
    if let Some(p) = perturbable {
        for (n, &ok) in noisy.iter_mut().zip(p) {
            *n &= ok;
        }
    }
    if cfg.sigma == 0.0 || !noisy.iter().any(|&b| b) {
        return Ok(0.0);
    }
    let h = model.predict_proba(x)?;
    let mut rng = seed::rng(mix64(&[seed, stream::PREDICTION_GAP]));
    let m = cfg.m_pred_gap;
    let pts = Array2::from_shape_fn((m, d), |(_, j)| {
        let z: f64 = rng.sample(StandardNormal);
        if noisy[j] {
            x[j] + cfg.sigma * z
        } else {
            x[j]
        }
    });
    let hs = model.predict_proba_batch(pts.view())?;
    Ok(hs.iter().map(|v| (h - v).abs()).sum::<f64>() / m as f64)
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Mean L1 distance between `E(x)` and explanations at `m_stability`
/// Gaussian neighbours of `x`.
///
/// `E(x)` uses `seed`; neighbour `j` is explained with `seed + j`.
pub fn instability(
    x: &[f64],
    explain: &ExplainFn<'_>,
    cfg: &MetricConfig,
    seed: u64,
) -> Result<f64> {
    let reference = explain(x, seed)?;
    instability_with_reference(x, &reference, explain, cfg, seed)
}

/// [`instability`] with `E(x)` already computed under `seed`.
pub fn instability_with_reference(
    x: &[f64],
    reference: &[f64],
    explain: &ExplainFn<'_>,
    cfg: &MetricConfig,
    seed: u64,
) -> Result<f64> {
    check_dim(x.len(), reference.len())?;
    if cfg.m_stability == 0 {
        return Err(Error::Config("m_stability must be >= 1".into()));
    }
    let mut rng = seed::rng(mix64(&[seed, stream::INSTABILITY]));
    let mut total = 0.0;
    let mut neighbour = vec![0.0; x.len()];
    for j in 1..=cfg.m_stability {
        for (n, &v) in neighbour.iter_mut().zip(x) {
            let z: f64 = rng.sample(StandardNormal);
            *n = v + cfg.sigma * z;
        }
        let e = explain(&neighbour, seed.wrapping_add(j as u64))?;
        check_dim(reference.len(), e.len())?;
        total += l1(reference, &e);
    }
    Ok(total / cfg.m_stability as f64)
}

/// Mean L1 distance between the explanation under `seeds[0]` and those
/// under `seeds[1..]`, all at the same point.
pub fn inconsistency(x: &[f64], explain: &ExplainFn<'_>, seeds: &[u64]) -> Result<f64> {
    let (&first, rest) = seeds
        .split_first()
        .ok_or_else(|| Error::Config("inconsistency needs at least 2 seeds".into()))?;
    let reference = explain(x, first)?;
    inconsistency_with_reference(x, &reference, explain, rest)
}

/// [`inconsistency`] with the reference explanation already computed.
pub fn inconsistency_with_reference(
    x: &[f64],
    reference: &[f64],
    explain: &ExplainFn<'_>,
    other_seeds: &[u64],
) -> Result<f64> {
    if other_seeds.is_empty() {
        return Err(Error::Config("inconsistency needs at least 2 seeds".into()));
    }
    let mut total = 0.0;
    for &s in other_seeds {
        let e = explain(x, s)?;
        check_dim(reference.len(), e.len())?;
        total += l1(reference, &e);
    }
    Ok(total / other_seeds.len() as f64)
}

/// Number of importances strictly above the threshold `t`.
pub fn complexity(w: &[f64], t: f64, signed: bool) -> usize {
    w.iter().filter(|&&v| importance_key(v, signed) > t).count()
}
