use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{sample_file_name, CellResult, ExperimentResult};
use crate::error::{Error, Result};
use crate::explainers::Method;
use crate::metrics::Metric;
use crate::models::ModelKind;
use crate::stats::TestMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Md,
    Json,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Csv, ReportFormat::Md, ReportFormat::Json];
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Md),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::Config(format!("unknown report format `{s}`"))),
        }
    }
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn methods_of(result: &ExperimentResult) -> Vec<Method> {
    let mut out: Vec<Method> = Vec::new();
    for c in &result.cells {
        if !out.contains(&c.method) {
            out.push(c.method);
        }
    }
    out
}

fn models_of(result: &ExperimentResult) -> Vec<ModelKind> {
    let mut out: Vec<ModelKind> = Vec::new();
    for c in &result.cells {
        if !out.contains(&c.model) {
            out.push(c.model);
        }
    }
    out
}

fn metrics_of(result: &ExperimentResult) -> Vec<Metric> {
    Metric::ALL
        .into_iter()
        .filter(|m| result.cells.iter().any(|c| c.metric == *m))
        .collect()
}

fn long_pvalues_csv(result: &ExperimentResult) -> Result<String> {
    csv_string(
        &[
            "model",
            "method",
            "metric",
            "p_value",
            "significant",
            "test",
            "u_statistic",
            "normal_p_value",
        ],
        result.cells.iter().map(|c| {
            vec![
                c.model.name().into(),
                c.method.name().into(),
                c.metric.name().into(),
                c.disparity.p_value.to_string(),
                c.disparity.significant.to_string(),
                match c.disparity.method {
                    TestMethod::Exact => "exact".into(),
                    TestMethod::MonteCarlo => "monte_carlo".into(),
                },
                c.disparity.u_statistic.to_string(),
                c.disparity
                    .normal_p_value
                    .map(|p| p.to_string())
                    .unwrap_or_default(),
            ]
        }),
    )
}

/// Rows are models, columns explainers; `None` where the metric does not apply.
fn metric_grid<'a>(
    result: &'a ExperimentResult,
    metric: Metric,
) -> Vec<(ModelKind, Vec<Option<&'a CellResult>>)> {
    let methods = methods_of(result);
    models_of(result)
        .into_iter()
        .filter_map(|model| {
            let row: Vec<_> = methods
                .iter()
                .map(|&m| result.cell(model, m, metric))
                .collect();
            row.iter().any(Option::is_some).then_some((model, row))
        })
        .collect()
}

fn grid_csv(result: &ExperimentResult, metric: Metric) -> Result<String> {
    let methods = methods_of(result);
    let mut header = vec!["model"];
    header.extend(methods.iter().map(|m| m.name()));
    csv_string(
        &header,
        metric_grid(result, metric).into_iter().map(|(model, row)| {
            let mut r = vec![model.name().to_string()];
            r.extend(row.iter().map(|c| {
                c.map(|c| c.disparity.p_value.to_string())
                    .unwrap_or_default()
            }));
            r
        }),
    )
}

/// Markdown grid; significant cells in bold, Monte-Carlo p-values marked with `†`.
fn grid_md(result: &ExperimentResult, metric: Metric) -> String {
    let methods = methods_of(result);
    let mut s = String::new();
    let _ = writeln!(s, "### {}\n", metric.name());
    let _ = writeln!(
        s,
        "| model | {} |",
        methods
            .iter()
            .map(|m| m.name())
            .collect::<Vec<_>>()
            .join(" | ")
    );
    let _ = writeln!(s, "|---|{}", "---|".repeat(methods.len()));
    for (model, row) in metric_grid(result, metric) {
        let cells: Vec<String> = row
            .iter()
            .map(|c| match c {
                None => "n/a".into(),
                Some(c) => {
                    let mark = if c.disparity.method == TestMethod::MonteCarlo {
                        "†"
                    } else {
                        ""
                    };
                    let p = format!("{:.3}{mark}", c.disparity.p_value);
                    if c.disparity.significant {
                        format!("**{p}**")
                    } else {
                        p
                    }
                }
            })
            .collect();
        let _ = writeln!(s, "| {} | {} |", model.name(), cells.join(" | "));
    }
    s
}

fn counts_csv(result: &ExperimentResult) -> Result<String> {
    csv_string(
        &["dataset", "model", "method", "significant", "metrics"],
        result.counts.rows.iter().map(|r| {
            vec![
                r.dataset.clone(),
                r.model.clone(),
                r.method.clone(),
                r.significant.to_string(),
                r.metrics.to_string(),
            ]
        }),
    )
}

fn counts_md(result: &ExperimentResult) -> String {
    let c = &result.counts;
    let methods = methods_of(result);
    let mut s = String::from("### significant metrics per combination\n\n");
    let _ = writeln!(
        s,
        "| dataset | model | {} |",
        methods
            .iter()
            .map(|m| m.name())
            .collect::<Vec<_>>()
            .join(" | ")
    );
    let _ = writeln!(s, "|---|---|{}", "---|".repeat(methods.len()));
    for model in models_of(result) {
        let cells: Vec<String> = methods
            .iter()
            .map(|m| {
                c.rows
                    .iter()
                    .find(|r| r.model == model.name() && r.method == m.name())
                    .map(|r| format!("{}/{}", r.significant, r.metrics))
                    .unwrap_or_else(|| "n/a".into())
            })
            .collect();
        let _ = writeln!(
            s,
            "| {} | {} | {} |",
            result.metadata.dataset,
            model.name(),
            cells.join(" | ")
        );
    }
    let _ = writeln!(
        s,
        "\n{}/{} cells significant at alpha = {} ({:.1}%); {}/{} combinations with at least one.",
        c.significant_cells,
        c.total_cells,
        c.alpha,
        100.0 * c.fraction_significant,
        c.combinations_with_any,
        c.total_combinations
    );
    s
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn group_means_csv(result: &ExperimentResult) -> Result<String> {
    let seeds = &result.metadata.trial_seeds;
    let rows = result.cells.iter().flat_map(|c| {
        seeds.iter().enumerate().map(move |(t, seed)| {
            vec![
                c.model.name().into(),
                c.method.name().into(),
                c.metric.name().into(),
                seed.to_string(),
                c.group0_means[t].to_string(),
                c.group1_means[t].to_string(),
            ]
        })
    });
    csv_string(
        &[
            "model",
            "method",
            "metric",
            "trial_seed",
            "group0_mean",
            "group1_mean",
        ],
        rows,
    )
}

fn group_summary_csv(result: &ExperimentResult) -> Result<String> {
    csv_string(
        &[
            "model",
            "method",
            "metric",
            "group0_mean",
            "group0_std",
            "group1_mean",
            "group1_std",
            "p_value",
        ],
        result.cells.iter().map(|c| {
            let (m0, s0) = mean_std(&c.group0_means);
            let (m1, s1) = mean_std(&c.group1_means);
            vec![
                c.model.name().into(),
                c.method.name().into(),
                c.metric.name().into(),
                m0.to_string(),
                s0.to_string(),
                m1.to_string(),
                s1.to_string(),
                c.disparity.p_value.to_string(),
            ]
        }),
    )
}

fn json(result: &ExperimentResult) -> Result<String> {
    let mut s = serde_json::to_string_pretty(result)?;
    s.push('\n');
    Ok(s)
}

/// The whole report in one format, as printed by `xaudit report`.
pub fn render(result: &ExperimentResult, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => json(result),
        ReportFormat::Csv => long_pvalues_csv(result),
        ReportFormat::Md => {
            let mut s = format!("## {}\n\n", result.metadata.dataset);
            for metric in metrics_of(result) {
                s.push_str(&grid_md(result, metric));
                s.push('\n');
            }
            s.push_str(&counts_md(result));
            Ok(s)
        }
    }
}

fn write(dir: &Path, name: &str, text: &str, out: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    out.push(path);
    Ok(())
}

/// Writes the report files for each requested format into `dir`.
///
/// Output depends only on `result`, so identical runs give identical files.
pub fn emit_report(
    result: &ExperimentResult,
    dir: &Path,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for &format in formats {
        match format {
            ReportFormat::Csv => {
                write(dir, "pvalues.csv", &long_pvalues_csv(result)?, &mut out)?;
                for metric in metrics_of(result) {
                    write(
                        dir,
                        &format!("pvalues_{}.csv", metric.name()),
                        &grid_csv(result, metric)?,
                        &mut out,
                    )?;
                }
                write(dir, "counts.csv", &counts_csv(result)?, &mut out)?;
                write(dir, "group_means.csv", &group_means_csv(result)?, &mut out)?;
                write(
                    dir,
                    "group_summary.csv",
                    &group_summary_csv(result)?,
                    &mut out,
                )?;
            }
            ReportFormat::Md => {
                for metric in metrics_of(result) {
                    write(
                        dir,
                        &format!("pvalues_{}.md", metric.name()),
                        &grid_md(result, metric),
                        &mut out,
                    )?;
                }
                write(dir, "counts.md", &counts_md(result), &mut out)?;
            }
            ReportFormat::Json => write(dir, "result.json", &json(result)?, &mut out)?,
        }
    }
    Ok(out)
}

/// Writes `samples/trial_<seed>_<model>.csv` with one row per metric value.
pub fn write_samples(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let sdir = dir.join("samples");
    fs::create_dir_all(&sdir).map_err(|e| Error::io(&sdir, e))?;
    let mut out = Vec::new();
    for trial in &result.trials {
        for model in models_of(result) {
            if trial.samples.is_empty() {
                return Err(Error::Input(
                    "per-instance samples are not kept in result.json".into(),
                ));
            }
            let rows = trial.samples.iter().filter(|s| s.model == model).map(|s| {
                vec![
                    s.instance_index.to_string(),
                    s.group.to_string(),
                    s.method.name().into(),
                    s.metric.name().into(),
                    s.value.to_string(),
                    s.seed.to_string(),
                ]
            });
            let text = csv_string(
                &[
                    "instance_index",
                    "group",
                    "method",
                    "metric",
                    "value",
                    "seed",
                ],
                rows,
            )?;
            write(
                dir,
                &sample_file_name(trial.trial_seed, model),
                &text,
                &mut out,
            )?;
        }
    }
    Ok(out)
}
