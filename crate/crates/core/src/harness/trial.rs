use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::dataio::{
    encode_features, partition_groups, stratified_split, ColumnKind, Dataset, FeatureMatrix,
};
use crate::error::{Error, Result};
use crate::explainers::{explain, ExplainerConfig, Method};
use crate::metrics::{self, Metric, MetricConfig};
use crate::models::{self, accuracy, ground_truth_weights, Model, ModelKind, TrainedModel};
use crate::seed::{instance_seed, mix64, stream};

/// One metric value for one explained test instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    /// Row index inside the trial's test split.
    pub instance_index: usize,
    pub group: u8,
    pub model: ModelKind,
    pub method: Method,
    pub metric: Metric,
    pub value: f64,
    /// Canonical explanation seed of the instance.
    pub seed: u64,
}

/// Per-trial group means for one (model, method, metric) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMeans {
    pub model: ModelKind,
    pub method: Method,
    pub metric: Metric,
    pub mean_group0: f64,
    pub mean_group1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub kind: ModelKind,
    pub train_seed: u64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    /// Explained instances per group after any cap.
    pub n0: usize,
    pub n1: usize,
    pub models: Vec<ModelSummary>,
    pub cells: Vec<CellMeans>,
    /// Per-instance sample files, relative to the report directory, one per model.
    pub sample_files: Vec<String>,
    #[serde(skip)]
    pub samples: Vec<MetricSample>,
}

impl TrialResult {
    pub fn cell(&self, model: ModelKind, method: Method, metric: Metric) -> Option<&CellMeans> {
        self.cells
            .iter()
            .find(|c| c.model == model && c.method == method && c.metric == metric)
    }
}

/// Everything fixed for a single trial that the per-instance work needs.
struct TrialContext<'a> {
    trial_seed: u64,
    model: &'a TrainedModel,
    omega: Option<Vec<f64>>,
    explainer_cfg: &'a ExplainerConfig,
    metric_cfg: &'a MetricConfig,
    metrics: &'a [Metric],
    perturbable: Option<Vec<bool>>,
}

impl TrialContext<'_> {
    fn evaluate(&self, method: Method, x: &[f64], instance: usize) -> Result<Vec<(Metric, f64)>> {
        let model: &dyn Model = self.model;
        let cfg = self.metric_cfg;
        let seed = instance_seed(self.trial_seed, method.id(), instance as u64, 0);
        let explain_fn = |p: &[f64], s: u64| explain(method, model, p, self.explainer_cfg, s);
        let w = explain_fn(x, seed)?;
        let mut out = Vec::with_capacity(self.metrics.len());
        for &metric in self.metrics {
            let value = match metric {
                Metric::GroundTruthFidelity => {
                    let omega = self.omega.as_deref().ok_or_else(|| {
                        Error::UnsupportedModel("ground-truth fidelity needs a linear model".into())
                    })?;
                    metrics::ground_truth_fidelity(&w, omega, cfg.k, cfg.signed_importances)?
                }
                Metric::PredictionGap => metrics::prediction_gap_masked(
                    model,
                    x,
                    &w,
                    cfg,
                    seed,
                    self.perturbable.as_deref(),
                )?,
                Metric::Complexity => metrics::complexity(&w, cfg.t, cfg.signed_importances) as f64,
                Metric::Instability => {
                    metrics::instability_with_reference(x, &w, &explain_fn, cfg, seed)?
                }
                Metric::Inconsistency => {
                    let seeds: Vec<u64> = (1..=cfg.m_consistency as u64)
                        .map(|j| seed.wrapping_add(j))
                        .collect();
                    metrics::inconsistency_with_reference(x, &w, &explain_fn, &seeds)?
                }
            };
            out.push((metric, value));
        }
        Ok(out)
    }
}

fn capped(indices: &[usize], cap: Option<usize>) -> Vec<usize> {
    let n = cap.map_or(indices.len(), |c| c.min(indices.len()));
    indices[..n].to_vec()
}

/// Relative path of the per-instance sample file for one trial and model.
pub fn sample_file_name(trial_seed: u64, model: ModelKind) -> String {
    format!("samples/trial_{trial_seed}_{}.csv", model.name())
}

/// Seed used to train `kind` in trial `trial_seed`.
pub fn model_seed(trial_seed: u64, kind: ModelKind) -> u64 {
    mix64(&[trial_seed, stream::MODEL, kind.id()])
}

/// Split seed for trial `trial_seed`.
pub fn split_seed(trial_seed: u64) -> u64 {
    mix64(&[trial_seed, stream::SPLIT])
}

/// Split, encode and train every configured model for one trial.
pub fn prepare_trial(
    cfg: &ExperimentConfig,
    data: &Dataset,
    trial_seed: u64,
) -> Result<(FeatureMatrix, FeatureMatrix, Vec<TrainedModel>)> {
    let (train, test) = stratified_split(data, cfg.test_fraction, split_seed(trial_seed))?;
    let (xtr, xte) = encode_features(&train, &test)?;
    let trained = cfg
        .model_kinds
        .iter()
        .map(|&kind| {
            let tc = cfg.train.clone().with_seed(model_seed(trial_seed, kind));
            models::train(kind, xtr.x.view(), &xtr.labels, &tc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((xtr, xte, trained))
}

/// Runs one full trial: split, encode, train, explain and score.
pub fn run_trial(cfg: &ExperimentConfig, data: &Dataset, trial_seed: u64) -> Result<TrialResult> {
    let (xtr, xte, trained) = prepare_trial(cfg, data, trial_seed)?;
    let d = xtr.d();
    let groups = partition_groups(&xte.groups)?;
    let d0 = capped(&groups.d0, cfg.max_instances_per_group);
    let d1 = capped(&groups.d1, cfg.max_instances_per_group);
    let mut instances: Vec<usize> = d0.iter().chain(&d1).copied().collect();
    instances.sort_unstable();

    let mut explainer_cfg = cfg.explainer_config.clone();
    if explainer_cfg.kernelshap.background.is_none() {
        explainer_cfg.kernelshap.background = Some(xtr.column_means());
    }
    explainer_cfg.validate(d)?;
    cfg.metric_config.validate(d)?;
    let perturbable = (!cfg.metric_config.noise_on_onehot).then(|| {
        xtr.column_kinds
            .iter()
            .map(|k| *k != ColumnKind::Onehot)
            .collect()
    });

    let mut summaries = Vec::new();
    let mut cells = Vec::new();
    let mut samples = Vec::new();
    for (&kind, model) in cfg.model_kinds.iter().zip(&trained) {
        summaries.push(ModelSummary {
            kind,
            train_seed: model_seed(trial_seed, kind),
            test_accuracy: accuracy(model, xte.x.view(), &xte.labels)?,
        });
        let metric_list = cfg.metrics_for(kind);
        let ctx = TrialContext {
            trial_seed,
            model,
            omega: if kind == ModelKind::Lr {
                Some(ground_truth_weights(model)?)
            } else {
                None
            },
            explainer_cfg: &explainer_cfg,
            metric_cfg: &cfg.metric_config,
            metrics: &metric_list,
            perturbable: perturbable.clone(),
        };
        for &method in &cfg.explainer_kinds {
            let per_instance = instances
                .par_iter()
                .map(|&i| ctx.evaluate(method, &xte.row(i), i))
                .collect::<Result<Vec<_>>>()?;
            let mut sums = vec![[0.0f64; 2]; metric_list.len()];
            for (&i, values) in instances.iter().zip(&per_instance) {
                let g = xte.groups[i];
                let seed = instance_seed(trial_seed, method.id(), i as u64, 0);
                for (slot, &(metric, value)) in values.iter().enumerate() {
                    sums[slot][usize::from(g)] += value;
                    samples.push(MetricSample {
                        instance_index: i,
                        group: g,
                        model: kind,
                        method,
                        metric,
                        value,
                        seed,
                    });
                }
            }
            for (slot, &metric) in metric_list.iter().enumerate() {
                cells.push(CellMeans {
                    model: kind,
                    method,
                    metric,
                    mean_group0: sums[slot][0] / d0.len() as f64,
                    mean_group1: sums[slot][1] / d1.len() as f64,
                });
            }
        }
    }
    Ok(TrialResult {
        trial_seed,
        n_train: xtr.n(),
        n_test: xte.n(),
        n0: d0.len(),
        n1: d1.len(),
        models: summaries,
        cells,
        sample_files: cfg
            .model_kinds
            .iter()
            .map(|&k| sample_file_name(trial_seed, k))
            .collect(),
        samples,
    })
}
