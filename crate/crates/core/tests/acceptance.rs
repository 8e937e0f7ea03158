//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --test acceptance`. The process exits nonzero when a
//! criterion fails that is not listed in [`EXPECTED_FAIL`].

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::{brute_force_shapley, central_difference, grid_cells, l2, max_abs_diff, mwu_bitmask_oracle, published_grid};
use itertools::Itertools;
use rand::Rng;
use rand_distr::StandardNormal;
use xaudit::dataio::{LabelRule, SyntheticSpec};
use xaudit::explainers::{explain_intgrad, explain_kernelshap, explain_vanilla_grad, IntGradConfig, KernelShapConfig};
use xaudit::harness::{aggregate_counts, run_experiment_on, write_samples, DataSource, ExperimentConfig, GridCell};
use xaudit::metrics::{complexity, ground_truth_fidelity, instability, prediction_gap, MetricConfig};
use xaudit::models::{LinearModel, MlpModel, Model, ModelKind};
use xaudit::seed::rng;
use xaudit::stats::mann_whitney_u;

/// Criteria allowed to fail without failing the process.
///
/// Criterion 2 asks for 30/162 and 20/36 from the published grid, but one
/// published sparsity cell has p = 0.016 and the numeric rule counts it,
/// giving 31/162 and 21/36.
const EXPECTED_FAIL: &[u32] = &[2];

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn normal_vec(r: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| r.sample(StandardNormal)).collect()
}

fn exact_test_fidelity() -> Result<String, String> {
    let a = [6.0, 7.0, 8.0, 9.0, 10.0];
    let b = [1.0, 2.0, 3.0, 4.0, 5.0];
    let p = mann_whitney_u(&a, &b, 0.05).map_err(|e| e.to_string())?.p_value;
    ensure((p - 2.0 / 252.0).abs() < 1e-15, || format!("separated p = {p}"))?;
    ensure(format!("{p:.3}") == "0.008", || format!("printed as {p:.3}"))?;

    // tie-free samples are determined by which ranks fall in group 0
    let mut r = rng(1);
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    for n in 2..=12usize {
        for n0 in 1..n {
            for ranks0 in (0..n).combinations(n0) {
                let values: Vec<f64> = (0..n).map(|i| i as f64 + r.random::<f64>() * 0.5).collect();
                let a: Vec<f64> = ranks0.iter().map(|&i| values[i]).collect();
                let b: Vec<f64> = (0..n).filter(|i| !ranks0.contains(i)).map(|i| values[i]).collect();
                let ours = mann_whitney_u(&a, &b, 0.05).map_err(|e| e.to_string())?;
                let (u, p) = mwu_bitmask_oracle(&a, &b);
                ensure(ours.u_statistic == u, || format!("U {} vs {u} for {a:?} {b:?}", ours.u_statistic))?;
                worst = worst.max((ours.p_value - p).abs());
                checked += 1;
            }
        }
    }
    ensure(worst <= 1e-12, || format!("max |p - oracle| = {worst:e}"))?;
    Ok(format!("p = {p:.6} (0.008); {checked} tie-free samples, max deviation {worst:e}"))
}

fn pipeline_replay() -> Result<String, String> {
    let cells = published_grid();
    let gc_lr: Vec<GridCell> = grid_cells(&cells)
        .into_iter()
        .filter(|c| c.dataset == "German Credit" && c.model == "LR")
        .collect();
    let row: Vec<usize> = aggregate_counts(&gc_lr, 0.05)
        .map_err(|e| e.to_string())?
        .rows
        .iter()
        .map(|r| r.significant)
        .collect();
    let t = aggregate_counts(&grid_cells(&cells), 0.05).map_err(|e| e.to_string())?;
    let summary = format!(
        "German Credit LR row {row:?}; {}/{} = {:.1}% cells; {}/{} = {:.0}% combinations",
        t.significant_cells,
        t.total_cells,
        100.0 * t.fraction_significant,
        t.combinations_with_any,
        t.total_combinations,
        100.0 * t.fraction_combinations_with_any
    );
    ensure(row == [2, 2, 1, 2, 2, 0], || summary.clone())?;
    ensure(
        (t.significant_cells, t.total_cells, t.combinations_with_any, t.total_combinations) == (30, 162, 20, 36),
        || format!("{summary}; expected 30/162 and 20/36"),
    )?;
    Ok(summary)
}

fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, b)| a - b).collect();
    l2(&diff) / l2(numeric).max(1e-12)
}

fn gradient_correctness() -> Result<String, String> {
    let mut r = rng(3);
    let mut worst_lr = 0.0f64;
    for _ in 0..100 {
        let d = r.random_range(1..12);
        let m = LinearModel::new(normal_vec(&mut r, d), r.sample(StandardNormal));
        let x = normal_vec(&mut r, d);
        let g = m.input_gradient(&x).map_err(|e| e.to_string())?;
        worst_lr = worst_lr.max(relative_error(&g, &central_difference(&m, &x, 1e-5)));
    }
    let d = 10;
    let mut worst_nn = 0.0f64;
    for point in 0..100u64 {
        let m = MlpModel::glorot(d, &[50, 100, 200], 3000 + point / 10);
        // resample points next to a ReLU kink
        let x = loop {
            let x = normal_vec(&mut r, d);
            let zs = m.pre_activations(&x).map_err(|e| e.to_string())?;
            if zs[..zs.len() - 1].iter().all(|z| z.iter().all(|v| v.abs() > 1e-3)) {
                break x;
            }
        };
        let g = m.input_gradient(&x).map_err(|e| e.to_string())?;
        worst_nn = worst_nn.max(relative_error(&g, &central_difference(&m, &x, 1e-6)));
    }
    let msg = format!("max relative error LR {worst_lr:.2e}, MLP {worst_nn:.2e}");
    ensure(worst_lr < 1e-4 && worst_nn < 1e-4, || msg.clone())?;
    Ok(msg)
}

fn intgrad_completeness() -> Result<String, String> {
    let d = 8;
    let m = MlpModel::glorot(d, &[50, 100, 200], 4);
    let mut r = rng(4);
    let baseline = vec![0.0; d];
    let h0 = m.predict_proba(&baseline).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for i in 0..20 {
        let x = normal_vec(&mut r, d);
        let target = m.predict_proba(&x).map_err(|e| e.to_string())? - h0;
        let residual = |steps| -> Result<f64, String> {
            let a = explain_intgrad(&m, &x, &IntGradConfig { baseline: None, steps }).map_err(|e| e.to_string())?;
            Ok((a.iter().sum::<f64>() - target).abs())
        };
        let (coarse, fine) = (residual(10)?, residual(300)?);
        ensure(fine <= 1e-3, || format!("instance {i}: residual {fine:e} at 300 steps"))?;
        ensure(fine < coarse, || format!("instance {i}: {fine:e} at 300 vs {coarse:e} at 10"))?;
        worst = worst.max(fine);
    }
    Ok(format!("20 instances, max residual at 300 steps {worst:.2e}"))
}

fn kernelshap_exactness() -> Result<String, String> {
    let mut r = rng(5);
    let mut worst = 0.0f64;
    let mut worst_eff = 0.0f64;
    for d in 1..=10usize {
        for _ in 0..5 {
            let m = LinearModel::new(normal_vec(&mut r, d), r.sample(StandardNormal));
            let x = normal_vec(&mut r, d);
            let bg = normal_vec(&mut r, d);
            let gap = m.predict_proba(&x).unwrap() - m.predict_proba(&bg).unwrap();
            let full = KernelShapConfig { samples: (1usize << d).saturating_sub(2).max(1), background: Some(bg.clone()) };
            let phi = explain_kernelshap(&m, &x, &full, 0).map_err(|e| e.to_string())?;
            worst = worst.max(max_abs_diff(&phi, &brute_force_shapley(&m, &x, &bg)));
            worst_eff = worst_eff.max((phi.iter().sum::<f64>() - gap).abs());
            for seed in 0..3 {
                let sampled = KernelShapConfig { samples: 2 * d + 4, background: Some(bg.clone()) };
                let phi = explain_kernelshap(&m, &x, &sampled, seed).map_err(|e| e.to_string())?;
                worst_eff = worst_eff.max((phi.iter().sum::<f64>() - gap).abs());
            }
        }
    }
    let mlp = MlpModel::glorot(12, &[20, 10], 5);
    for seed in 0..10 {
        let x = normal_vec(&mut r, 12);
        let bg = normal_vec(&mut r, 12);
        let gap = mlp.predict_proba(&x).unwrap() - mlp.predict_proba(&bg).unwrap();
        let cfg = KernelShapConfig { samples: 100, background: Some(bg) };
        let phi = explain_kernelshap(&mlp, &x, &cfg, seed).map_err(|e| e.to_string())?;
        worst_eff = worst_eff.max((phi.iter().sum::<f64>() - gap).abs());
    }
    let msg = format!("max |phi - brute force| {worst:.2e}, max efficiency residual {worst_eff:.2e}");
    ensure(worst <= 1e-6 && worst_eff <= 1e-9, || msg.clone())?;
    Ok(msg)
}

fn small_audit_config(rule: LabelRule, seed: u64) -> ExperimentConfig {
    let mut spec = SyntheticSpec::new(2000, 5, 0.3, rule);
    spec.include_sensitive = rule == LabelRule::GroupDependentNonlinear;
    let mut cfg = ExperimentConfig::new(DataSource::Synthetic { synthetic: spec, seed });
    cfg.trial_seeds = (0..5).map(|t| seed * 1000 + t).collect();
    cfg.trials = 5;
    cfg.max_instances_per_group = Some(10);
    cfg.train.epochs = 10;
    cfg.explainer_config.lime.samples = 200;
    cfg.explainer_config.kernelshap.samples = 64;
    cfg.explainer_config.smoothgrad.samples = 50;
    cfg.metric_config.m_pred_gap = 200;
    cfg
}

fn metric_identities() -> Result<String, String> {
    let mut r = rng(6);
    let mut pg_checks = 0;
    for d in [3usize, 6, 10] {
        let m = MlpModel::glorot(d, &[16, 8], d as u64);
        for _ in 0..10 {
            let x = normal_vec(&mut r, d);
            let w = normal_vec(&mut r, d);
            let all = MetricConfig { k: d, ..MetricConfig::default() };
            let quiet = MetricConfig { k: 1, sigma: 0.0, ..MetricConfig::default() };
            let a = prediction_gap(&m, &x, &w, &all, 1).map_err(|e| e.to_string())?;
            let b = prediction_gap(&m, &x, &w, &quiet, 1).map_err(|e| e.to_string())?;
            ensure(a == 0.0 && b == 0.0, || format!("prediction gap {a}, {b} at d = {d}"))?;
            pg_checks += 2;

            let constant = |_: &[f64], _: u64| Ok(w.clone());
            let s = instability(&x, &constant, &MetricConfig::default(), 3).map_err(|e| e.to_string())?;
            ensure(s == 0.0, || format!("constant explainer instability {s}"))?;
        }
    }

    for _ in 0..100 {
        let d = r.random_range(1..30);
        let w = normal_vec(&mut r, d);
        let max = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let counts: Vec<usize> = (0..50).map(|i| complexity(&w, max * 1.2 * i as f64 / 49.0, false)).collect();
        ensure(counts.windows(2).all(|p| p[1] <= p[0]), || format!("complexity not monotone: {counts:?}"))?;
    }

    let mut cfg = small_audit_config(LabelRule::GroupDependentNonlinear, 6);
    cfg.normalize().map_err(|e| e.to_string())?;
    let data = cfg.dataset.load().map_err(|e| e.to_string())?;
    let result = run_experiment_on(&cfg, &data).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_samples(&result, dir.path()).map_err(|e| e.to_string())?;
    let mut files = 0;
    let mut zero_rows = 0;
    for trial in &result.trials {
        for file in &trial.sample_files {
            let mut rdr = csv::Reader::from_path(dir.path().join(file)).map_err(|e| e.to_string())?;
            for rec in rdr.records() {
                let rec = rec.map_err(|e| e.to_string())?;
                if &rec[3] == "inconsistency" && matches!(&rec[2], "VanillaGrad" | "IntGrad") {
                    ensure(&rec[4] == "0", || format!("{file}: {} inconsistency {}", &rec[2], &rec[4]))?;
                    zero_rows += 1;
                }
            }
            files += 1;
        }
    }
    ensure(zero_rows > 0, || "no deterministic-method inconsistency rows".into())?;
    Ok(format!(
        "{pg_checks} prediction-gap and 30 instability identities; 100 complexity curves; {zero_rows} zero rows in {files} sample files"
    ))
}

fn ground_truth_sanity() -> Result<String, String> {
    let mut r = rng(7);
    let d = 8;
    let m = LinearModel::new(normal_vec(&mut r, d), 0.3);
    let omega = m.ground_truth_weights();
    for _ in 0..200 {
        let x = normal_vec(&mut r, d);
        let w = explain_vanilla_grad(&m, &x).map_err(|e| e.to_string())?;
        for k in 1..=d {
            let f = ground_truth_fidelity(&w, &omega, k, false).map_err(|e| e.to_string())?;
            ensure(f == 1.0, || format!("fidelity {f} at k = {k}"))?;
        }
    }
    Ok(format!("fidelity 1.0 for k = 1..={d} on 200 instances"))
}

fn null_calibration() -> Result<String, String> {
    let (mut sig, mut total) = (0usize, 0usize);
    for rep in 0..40u64 {
        let mut cfg = small_audit_config(LabelRule::SharedLinear, 100 + rep);
        cfg.model_kinds = vec![ModelKind::Lr, ModelKind::Nn];
        cfg.normalize().map_err(|e| e.to_string())?;
        let data = cfg.dataset.load().map_err(|e| e.to_string())?;
        let result = run_experiment_on(&cfg, &data).map_err(|e| e.to_string())?;
        sig += result.counts.significant_cells;
        total += result.counts.total_cells;
    }
    let frac = sig as f64 / total as f64;
    let msg = format!("{sig}/{total} = {:.2}% significant cells over 40 replications", 100.0 * frac);
    ensure(frac <= 0.08, || msg.clone())?;
    Ok(msg)
}

fn planted_detection() -> Result<String, String> {
    let mut flagged = Vec::new();
    for rep in 0..5u64 {
        let mut cfg = small_audit_config(LabelRule::GroupDependentNonlinear, 500 + rep);
        cfg.model_kinds = vec![ModelKind::Nn];
        cfg.normalize().map_err(|e| e.to_string())?;
        let data = cfg.dataset.load().map_err(|e| e.to_string())?;
        let result = run_experiment_on(&cfg, &data).map_err(|e| e.to_string())?;
        flagged.push(result.counts.significant_cells);
    }
    let hits = flagged.iter().filter(|&&s| s > 0).count();
    let msg = format!("{hits}/5 replications flagged; significant cells per replication {flagged:?}");
    ensure(hits >= 4, || msg.clone())?;
    Ok(msg)
}

const DETERMINISM_CONFIG: &str = r#"
trials = 5
output_dir = "bundle"
[train]
epochs = 10
[explainer_config.lime]
samples = 500
[explainer_config.kernelshap]
samples = 64
[explainer_config.smoothgrad]
samples = 100
[dataset]
seed = 11
[dataset.synthetic]
n = 1000
d_continuous = 5
p1 = 0.3
rule = "group_dependent_nonlinear"
include_sensitive = true
"#;

fn bundle_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else if path.file_name().is_some_and(|n| n != "run_log.json") {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn determinism() -> Result<String, String> {
    let mut bundles = Vec::new();
    let dirs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for (dir, threads) in dirs.iter().zip(["1", "4"]) {
        let cfg = dir.path().join("audit.toml");
        fs::write(&cfg, DETERMINISM_CONFIG).map_err(|e| e.to_string())?;
        let out = Command::new(env!("CARGO_BIN_EXE_xaudit"))
            .args(["audit", "--config", cfg.to_str().unwrap()])
            .env("XAUDIT_THREADS", threads)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(matches!(out.status.code(), Some(0 | 2)), || {
            format!("xaudit exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr))
        })?;
        bundles.push(bundle_files(&dir.path().join("bundle")));
    }
    let (a, b) = (&bundles[0], &bundles[1]);
    ensure(a.keys().eq(b.keys()), || "bundles list different files".into())?;
    let differing: Vec<_> = a.iter().filter(|(k, v)| b[*k] != **v).map(|(k, _)| k.display().to_string()).collect();
    ensure(differing.is_empty(), || format!("differing files: {differing:?}"))?;
    let bytes: usize = a.values().map(Vec::len).sum();
    Ok(format!("{} files, {bytes} bytes identical at 1 and 4 threads", a.len()))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, Duration, Check); 10] = [
        (1, "exact test fidelity", Duration::from_secs(5), exact_test_fidelity),
        (2, "count pipeline replay", Duration::from_secs(1), pipeline_replay),
        (3, "gradient correctness", Duration::from_secs(30), gradient_correctness),
        (4, "integrated gradients completeness", Duration::from_secs(60), intgrad_completeness),
        (5, "KernelSHAP exactness", Duration::from_secs(60), kernelshap_exactness),
        (6, "metric identities", Duration::from_secs(60), metric_identities),
        (7, "ground-truth fidelity sanity", Duration::from_secs(30), ground_truth_sanity),
        (8, "null calibration", Duration::from_secs(600), null_calibration),
        (9, "planted disparity detection", Duration::from_secs(600), planted_detection),
        (10, "determinism", Duration::from_secs(600), determinism),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut unexpected = Vec::new();
    let mut expected = Vec::new();
    for (id, name, budget, check) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            if elapsed <= budget {
                Ok(detail)
            } else {
                Err(format!("{detail}; took {elapsed:.1?}, budget {budget:?}"))
            }
        });
        match outcome {
            Ok(detail) => println!("PASS [{id:>2}] {name} ({elapsed:.2?}): {detail}"),
            Err(detail) => {
                println!("FAIL [{id:>2}] {name} ({elapsed:.2?}): {detail}");
                if EXPECTED_FAIL.contains(&id) {
                    expected.push(id);
                } else {
                    unexpected.push(id);
                }
            }
        }
    }
    println!("acceptance: {} unexpected failures {unexpected:?}, expected failures {expected:?}", unexpected.len());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
