//! End-to-end audit: repeated trials, per-cell disparity tests and reports.

mod config;
mod counts;
mod report;
mod trial;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::explainers::Method;
use crate::metrics::Metric;
use crate::models::ModelKind;
use crate::seed::mix64;
use crate::stats::{test_disparity_seeded, DisparityResult};

pub use config::{DataSource, ExperimentConfig, SchemaSource};
pub use counts::{aggregate_counts, CountRow, CountsTable, GridCell};
pub use report::{emit_report, render, write_samples, ReportFormat};
pub use trial::{
    model_seed, prepare_trial, run_trial, sample_file_name, split_seed, CellMeans, MetricSample,
    ModelSummary, TrialResult,
};

/// Environment variable that fixes the worker thread count.
pub const THREADS_ENV: &str = "XAUDIT_THREADS";

/// Disparity test for one (model, method, metric) cell across trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub model: ModelKind,
    pub method: Method,
    pub metric: Metric,
    /// Per-trial group means, in trial-seed order.
    pub group0_means: Vec<f64>,
    pub group1_means: Vec<f64>,
    pub disparity: DisparityResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub crate_version: String,
    pub config_hash: String,
    pub dataset: String,
    pub n_rows: usize,
    pub trial_seeds: Vec<u64>,
    pub alpha: f64,
    pub max_instances_per_group: Option<usize>,
    /// Kept out of serialized output so that reruns are byte-identical.
    #[serde(skip)]
    pub wall_time: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub metadata: RunMetadata,
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
    pub counts: CountsTable,
    pub trials: Vec<TrialResult>,
}

impl ExperimentResult {
    pub fn cell(&self, model: ModelKind, method: Method, metric: Metric) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.model == model && c.method == method && c.metric == metric)
    }

    pub fn any_significant(&self) -> bool {
        self.cells.iter().any(|c| c.disparity.significant)
    }

    /// The p-value grid in the form [`aggregate_counts`] consumes.
    pub fn grid_cells(&self) -> Vec<GridCell> {
        grid_of(&self.metadata.dataset, &self.cells)
    }
}

fn grid_of(dataset: &str, cells: &[CellResult]) -> Vec<GridCell> {
    cells
        .iter()
        .map(|c| GridCell {
            dataset: dataset.into(),
            model: c.model.name().into(),
            method: c.method.name().into(),
            metric: c.metric.name().into(),
            p_value: Some(c.disparity.p_value),
        })
        .collect()
}

fn metric_position(metric: Metric) -> u64 {
    Metric::ALL.iter().position(|&m| m == metric).unwrap_or(0) as u64
}

/// Builds a thread pool sized by [`THREADS_ENV`], if set.
pub fn thread_pool_from_env() -> Result<Option<rayon::ThreadPool>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{THREADS_ENV} = `{raw}` is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map(Some)
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))
}

/// Loads the configured dataset and runs the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let data = cfg.dataset.load()?;
    match thread_pool_from_env()? {
        Some(pool) => pool.install(|| run_experiment_on(cfg, &data)),
        None => run_experiment_on(cfg, &data),
    }
}

/// Runs every trial on `data`, tests each cell and counts significant ones.
pub fn run_experiment_on(cfg: &ExperimentConfig, data: &Dataset) -> Result<ExperimentResult> {
    let mut cfg = cfg.clone();
    cfg.normalize()?;
    let start = Instant::now();
    let trials = cfg
        .trial_seeds
        .par_iter()
        .map(|&seed| {
            log::info!("trial {seed}: start");
            run_trial(&cfg, data, seed).map_err(|e| Error::Trial {
                seed,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    for &model in &cfg.model_kinds {
        for &method in &cfg.explainer_kinds {
            for metric in cfg.metrics_for(model) {
                let mut g0 = Vec::with_capacity(trials.len());
                let mut g1 = Vec::with_capacity(trials.len());
                for t in &trials {
                    let c = t.cell(model, method, metric).ok_or_else(|| {
                        Error::IncompleteGrid(format!(
                            "trial {} lacks {model}/{method}/{metric}",
                            t.trial_seed
                        ))
                    })?;
                    g0.push(c.mean_group0);
                    g1.push(c.mean_group1);
                }
                let perm_seed = mix64(&[model.id(), method.id(), metric_position(metric)]);
                let disparity =
                    test_disparity_seeded(&g0, &g1, trials.len(), cfg.alpha, perm_seed)?;
                cells.push(CellResult {
                    model,
                    method,
                    metric,
                    group0_means: g0,
                    group1_means: g1,
                    disparity,
                });
            }
        }
    }

    let metadata = RunMetadata {
        crate_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: cfg.hash(),
        dataset: cfg.dataset_label(),
        n_rows: data.len(),
        trial_seeds: cfg.trial_seeds.clone(),
        alpha: cfg.alpha,
        max_instances_per_group: cfg.max_instances_per_group,
        wall_time: None,
    };
    let grid = grid_of(&metadata.dataset, &cells);
    let counts = aggregate_counts(&grid, cfg.alpha)?;
    cfg.output_dir = PathBuf::new();
    let mut result = ExperimentResult {
        metadata,
        config: cfg,
        cells,
        counts,
        trials,
    };
    result.metadata.wall_time = Some(start.elapsed());
    Ok(result)
}
