use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataio::{generate_synthetic, load_dataset, Dataset, DatasetSchema, SyntheticSpec};
use crate::error::{Error, Result};
use crate::explainers::{ExplainerConfig, Method};
use crate::metrics::{Metric, MetricConfig};
use crate::models::{ModelKind, TrainConfig};

/// Schema given inline or as a path to a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemaSource {
    Path(PathBuf),
    Inline(DatasetSchema),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DataSource {
    Csv {
        path: PathBuf,
        schema: SchemaSource,
    },
    Synthetic {
        synthetic: SyntheticSpec,
        #[serde(default)]
        seed: u64,
    },
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Csv { path, schema } => {
                let schema = match schema {
                    SchemaSource::Path(p) => DatasetSchema::from_file(p)?,
                    SchemaSource::Inline(s) => {
                        s.validate()?;
                        s.clone()
                    }
                };
                let (data, report) = load_dataset(path, &schema)?;
                if report.dropped_missing > 0 {
                    log::info!(
                        "dropped {} rows with missing values",
                        report.dropped_missing
                    );
                }
                Ok(data)
            }
            DataSource::Synthetic { synthetic, seed } => generate_synthetic(synthetic, *seed),
        }
    }

    fn default_name(&self) -> String {
        match self {
            DataSource::Csv { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into()),
            DataSource::Synthetic { .. } => "synthetic".into(),
        }
    }
}

fn default_models() -> Vec<ModelKind> {
    ModelKind::ALL.to_vec()
}
fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn default_metrics() -> Vec<Metric> {
    Metric::ALL.to_vec()
}
fn default_trials() -> usize {
    5
}
fn default_alpha() -> f64 {
    crate::stats::DEFAULT_ALPHA
}
fn default_output() -> PathBuf {
    PathBuf::from("xaudit-out")
}
fn default_test_fraction() -> f64 {
    0.2
}

/// Everything one audit needs. Read from TOML with [`ExperimentConfig::from_file`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DataSource,
    #[serde(default)]
    pub dataset_name: Option<String>,
    #[serde(default = "default_models")]
    pub model_kinds: Vec<ModelKind>,
    #[serde(default = "default_methods")]
    pub explainer_kinds: Vec<Method>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub metric_config: MetricConfig,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Defaults to `0..trials`.
    #[serde(default)]
    pub trial_seeds: Vec<u64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub explainer_config: ExplainerConfig,
    /// Desk-scale cap on explained test instances per group.
    #[serde(default)]
    pub max_instances_per_group: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(dataset: DataSource) -> Self {
        Self {
            dataset,
            dataset_name: None,
            model_kinds: default_models(),
            explainer_kinds: default_methods(),
            metrics: default_metrics(),
            metric_config: MetricConfig::default(),
            trials: default_trials(),
            trial_seeds: Vec::new(),
            alpha: default_alpha(),
            output_dir: default_output(),
            test_fraction: default_test_fraction(),
            train: TrainConfig::default(),
            explainer_config: ExplainerConfig::default(),
            max_instances_per_group: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text)?;
        cfg.normalize()?;
        Ok(cfg)
    }

    /// Parses a config file; relative paths are taken from the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DataSource::Csv { path, schema } = &mut self.dataset {
            fix(path);
            if let SchemaSource::Path(p) = schema {
                fix(p);
            }
        }
        fix(&mut self.output_dir);
    }

    /// Fills defaults and checks cross-field invariants.
    pub fn normalize(&mut self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.trial_seeds.is_empty() {
            self.trial_seeds = (0..self.trials as u64).collect();
        }
        if self.trial_seeds.len() != self.trials {
            return Err(Error::Config(format!(
                "trials = {} but {} trial seeds given",
                self.trials,
                self.trial_seeds.len()
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha = {} not in (0, 1)",
                self.alpha
            )));
        }
        if self.model_kinds.is_empty() || self.explainer_kinds.is_empty() || self.metrics.is_empty()
        {
            return Err(Error::Config(
                "models, explainers and metrics must be nonempty".into(),
            ));
        }
        if self.max_instances_per_group == Some(0) {
            return Err(Error::Config(
                "max_instances_per_group must be positive".into(),
            ));
        }
        dedup_in_order(&mut self.model_kinds);
        dedup_in_order(&mut self.explainer_kinds);
        dedup_in_order(&mut self.metrics);
        self.train.validate()
    }

    pub fn dataset_label(&self) -> String {
        self.dataset_name
            .clone()
            .unwrap_or_else(|| self.dataset.default_name())
    }

    /// Metrics evaluated for a model class.
    pub fn metrics_for(&self, kind: ModelKind) -> Vec<Metric> {
        self.metrics
            .iter()
            .copied()
            .filter(|m| !m.needs_linear_model() || kind == ModelKind::Lr)
            .collect()
    }

    /// SHA-256 of the config with `output_dir` cleared.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let text = serde_json::to_string(&canonical).expect("config serializes");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn dedup_in_order<T: PartialEq + Copy>(v: &mut Vec<T>) {
    let mut out: Vec<T> = Vec::with_capacity(v.len());
    for x in v.iter() {
        if !out.contains(x) {
            out.push(*x);
        }
    }
    *v = out;
}
