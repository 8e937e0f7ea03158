use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetSchema, FeatureSpec, NaPolicy, RawValue};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    /// One logit vector for both groups: no planted disparity.
    SharedLinear,
    /// Group 1 labels follow an `x0 * x1` interaction; group 0 stays linear.
    GroupDependentNonlinear,
}

/// Recipe for a synthetic dataset with continuous `x0..x{d-1}` features,
/// a `group` column (`"0"` majority, `"1"` minority) and a `label` column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d_continuous: usize,
    /// Probability that a row belongs to group 1.
    pub p1: f64,
    pub rule: LabelRule,
    /// Standard deviation of Gaussian noise added to the logit before thresholding.
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// Logit weights; defaults to [`default_logit_weights`].
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    /// Scale of the group-1 interaction term.
    #[serde(default = "default_interaction")]
    pub interaction: f64,
    /// Append the group indicator to the model features.
    #[serde(default)]
    pub include_sensitive: bool,
}

fn default_noise() -> f64 {
    0.5
}

fn default_interaction() -> f64 {
    3.0
}

impl SyntheticSpec {
    pub fn new(n: usize, d_continuous: usize, p1: f64, rule: LabelRule) -> Self {
        Self {
            n,
            d_continuous,
            p1,
            rule,
            noise: default_noise(),
            weights: None,
            interaction: default_interaction(),
            include_sensitive: false,
        }
    }

    pub fn schema(&self) -> DatasetSchema {
        DatasetSchema {
            target: "label".into(),
            positive_label: "1".into(),
            sensitive: "group".into(),
            group0: "0".into(),
            group1: "1".into(),
            features: (0..self.d_continuous)
                .map(|j| FeatureSpec::continuous(format!("x{j}")))
                .collect(),
            include_sensitive: self.include_sensitive,
            na_policy: NaPolicy::DropRow,
        }
    }
}

/// `w_j = (-1)^j * 2 / (j + 1)`, i.e. `(2, -1, 2/3, -1/2, ...)`.
pub fn default_logit_weights(d: usize) -> Vec<f64> {
    (0..d)
        .map(|j| if j % 2 == 0 { 2.0 } else { -2.0 } / (j as f64 + 1.0))
        .collect()
}

pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    if spec.n == 0 || spec.d_continuous == 0 {
        return Err(Error::Spec("n and d_continuous must be positive".into()));
    }
    if !(spec.p1 > 0.0 && spec.p1 < 1.0) {
        return Err(Error::Spec(format!("p1 = {} not in (0, 1)", spec.p1)));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(Error::Spec("noise must be finite and non-negative".into()));
    }
    let weights = match &spec.weights {
        Some(w) if w.len() != spec.d_continuous => {
            return Err(Error::Spec(format!(
                "{} weights for {} features",
                w.len(),
                spec.d_continuous
            )))
        }
        Some(w) => w.clone(),
        None => default_logit_weights(spec.d_continuous),
    };
    if spec.rule == LabelRule::GroupDependentNonlinear && spec.d_continuous < 2 {
        return Err(Error::Spec(
            "interaction rule needs at least 2 features".into(),
        ));
    }

    let mut rng = seed::rng(seed);
    let mut rows = Vec::with_capacity(spec.n);
    let mut labels = Vec::with_capacity(spec.n);
    let mut groups = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let group = u8::from(rng.random::<f64>() < spec.p1);
        let x: Vec<f64> = (0..spec.d_continuous)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let eps: f64 = rng.sample(StandardNormal);
        let linear: f64 = x.iter().zip(&weights).map(|(a, b)| a * b).sum();
        let logit = match (spec.rule, group) {
            (LabelRule::GroupDependentNonlinear, 1) => spec.interaction * x[0] * x[1],
            _ => linear,
        };
        labels.push(u8::from(logit + spec.noise * eps > 0.0));
        groups.push(group);
        rows.push(x.into_iter().map(RawValue::Num).collect());
    }
    Dataset::new(rows, labels, groups, spec.schema())
}
