//! Post hoc feature-attribution methods behind one seeded interface.
//!
//! Every method maps `(model, x, config, seed)` to a length-`d` importance
//! vector. Signs are preserved; metrics decide how to treat magnitude.

mod gradient;
mod kernelshap;
mod lime;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Model;

pub use gradient::{explain_intgrad, explain_smoothgrad, explain_vanilla_grad};
pub use kernelshap::{explain_kernelshap, shapley_kernel_weight};
pub use lime::explain_lime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lime,
    Shap,
    SmoothGrad,
    IntGrad,
    VanillaGrad,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Lime,
        Method::Shap,
        Method::SmoothGrad,
        Method::IntGrad,
        Method::VanillaGrad,
    ];

    /// Stable identifier mixed into per-instance seeds.
    pub fn id(self) -> u64 {
        match self {
            Method::Lime => 0,
            Method::Shap => 1,
            Method::SmoothGrad => 2,
            Method::IntGrad => 3,
            Method::VanillaGrad => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Lime => "LIME",
            Method::Shap => "SHAP",
            Method::SmoothGrad => "SmoothGrad",
            Method::IntGrad => "IntGrad",
            Method::VanillaGrad => "VanillaGrad",
        }
    }

    /// Whether the output depends on the seed.
    pub fn is_stochastic(self) -> bool {
        matches!(self, Method::Lime | Method::Shap | Method::SmoothGrad)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lime" => Ok(Method::Lime),
            "shap" | "kernelshap" => Ok(Method::Shap),
            "smoothgrad" => Ok(Method::SmoothGrad),
            "intgrad" | "integratedgradients" => Ok(Method::IntGrad),
            "vanillagrad" | "vangrad" | "gradient" => Ok(Method::VanillaGrad),
            _ => Err(Error::Config(format!("unknown explanation method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoothGradConfig {
    pub noise_std: f64,
    pub samples: usize,
}

impl Default for SmoothGradConfig {
    fn default() -> Self {
        Self {
            noise_std: 1.0,
            samples: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntGradConfig {
    /// Path start; all zeros (the training mean in raw units) when unset.
    pub baseline: Option<Vec<f64>>,
    pub steps: usize,
}

impl Default for IntGradConfig {
    fn default() -> Self {
        Self {
            baseline: None,
            steps: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimeConfig {
    pub samples: usize,
    /// Exponential kernel width; `0.75 * sqrt(d)` when unset.
    pub kernel_width: Option<f64>,
    pub ridge_penalty: f64,
    pub perturb_std: f64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            samples: 5000,
            kernel_width: None,
            ridge_penalty: 1.0,
            perturb_std: 1.0,
        }
    }
}

impl LimeConfig {
    pub fn kernel_width_for(&self, d: usize) -> f64 {
        self.kernel_width.unwrap_or(0.75 * (d as f64).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelShapConfig {
    /// Coalition budget. When it covers all `2^d - 2` proper coalitions they
    /// are enumerated with exact kernel weights instead of sampled.
    pub samples: usize,
    /// Reference point for absent features; the training column means.
    pub background: Option<Vec<f64>>,
}

impl Default for KernelShapConfig {
    fn default() -> Self {
        Self {
            samples: 1000,
            background: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainerConfig {
    pub smoothgrad: SmoothGradConfig,
    pub intgrad: IntGradConfig,
    pub lime: LimeConfig,
    pub kernelshap: KernelShapConfig,
}

impl ExplainerConfig {
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.smoothgrad.samples == 0 || self.lime.samples == 0 || self.kernelshap.samples == 0 {
            return Err(Error::Config("sample counts must be at least 1".into()));
        }
        if self.intgrad.steps == 0 {
            return Err(Error::Config("intgrad steps must be at least 1".into()));
        }
        if self.smoothgrad.noise_std < 0.0 || !self.smoothgrad.noise_std.is_finite() {
            return Err(Error::Config("smoothgrad noise_std must be >= 0".into()));
        }
        if !(self.lime.kernel_width_for(d) > 0.0) {
            return Err(Error::Config("lime kernel_width must be > 0".into()));
        }
        if self.lime.perturb_std < 0.0 {
            return Err(Error::Config("lime perturb_std must be >= 0".into()));
        }
        if self.lime.ridge_penalty <= 0.0 && self.lime.samples < d + 1 {
            return Err(Error::Config(format!(
                "lime without ridge needs at least {} samples",
                d + 1
            )));
        }
        for (name, v) in [
            ("intgrad baseline", &self.intgrad.baseline),
            ("kernelshap background", &self.kernelshap.background),
        ] {
            if let Some(v) = v {
                if v.len() != d {
                    return Err(Error::Config(format!(
                        "{name} has length {} (d = {d})",
                        v.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One feature-importance vector for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub importances: Vec<f64>,
    pub instance_index: usize,
    pub method: Method,
    pub seed: u64,
}

/// Dispatches to the method's explainer.
pub fn explain(
    method: Method,
    model: &dyn Model,
    x: &[f64],
    cfg: &ExplainerConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let w = match method {
        Method::VanillaGrad => explain_vanilla_grad(model, x)?,
        Method::SmoothGrad => explain_smoothgrad(model, x, &cfg.smoothgrad, seed)?,
        Method::IntGrad => explain_intgrad(model, x, &cfg.intgrad)?,
        Method::Lime => explain_lime(model, x, &cfg.lime, seed)?,
        Method::Shap => explain_kernelshap(model, x, &cfg.kernelshap, seed)?,
    };
    debug_assert!(w.iter().all(|v| v.is_finite()));
    Ok(w)
}

/// [`explain`] wrapped with its provenance.
pub fn explain_instance(
    method: Method,
    model: &dyn Model,
    x: &[f64],
    instance_index: usize,
    cfg: &ExplainerConfig,
    seed: u64,
) -> Result<Explanation> {
    Ok(Explanation {
        importances: explain(method, model, x, cfg, seed)?,
        instance_index,
        method,
        seed,
    })
}

/// Writes explanations as CSV: `instance_index,method,replicate,seed,<feature...>`.
pub fn write_explanations_csv<W: std::io::Write>(
    writer: W,
    feature_names: &[String],
    rows: &[(Explanation, usize)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![
        "instance_index".to_string(),
        "method".into(),
        "replicate".into(),
        "seed".into(),
    ];
    header.extend(feature_names.iter().cloned());
    w.write_record(&header)?;
    for (e, replicate) in rows {
        if e.importances.len() != feature_names.len() {
            return Err(Error::Shape {
                expected: feature_names.len(),
                got: e.importances.len(),
            });
        }
        let mut rec = vec![
            e.instance_index.to_string(),
            e.method.name().to_string(),
            replicate.to_string(),
            e.seed.to_string(),
        ];
        rec.extend(e.importances.iter().map(|v| format!("{v}")));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("maple".parse::<Method>().is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExplainerConfig::default();
        assert!(cfg.validate(4).is_ok());
        cfg.intgrad.steps = 0;
        assert!(cfg.validate(4).is_err());
        let mut cfg = ExplainerConfig::default();
        cfg.lime.ridge_penalty = 0.0;
        cfg.lime.samples = 3;
        assert!(cfg.validate(4).is_err());
        let mut cfg = ExplainerConfig::default();
        cfg.smoothgrad.noise_std = -1.0;
        assert!(cfg.validate(4).is_err());
    }

    #[test]
    fn default_kernel_width() {
        assert!((LimeConfig::default().kernel_width_for(16) - 3.0).abs() < 1e-15);
    }
}
