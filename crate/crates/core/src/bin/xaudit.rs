use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use xaudit::dataio::{encode_features, stratified_split};
use xaudit::explainers::{explain_instance, write_explanations_csv, Method};
use xaudit::harness::{
    emit_report, prepare_trial, render, run_experiment, split_seed, thread_pool_from_env,
    write_samples, ExperimentConfig, ExperimentResult, ReportFormat,
};
use xaudit::models::{Checkpoint, Model};
use xaudit::seed::instance_seed;

#[derive(Parser)]
#[command(
    name = "xaudit",
    version,
    about = "Audit explanation quality across demographic groups"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured model on one trial's split and save checkpoints.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Trial seed that fixes the split and the model initialisation.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Checkpoint directory; defaults to `<output_dir>/models`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Explain the test split of a trial with a saved model.
    Explain {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        method: Method,
        /// Trial seed used to rebuild the split; defaults to the checkpoint's.
        #[arg(long)]
        seed: Option<u64>,
        /// Explanations per instance under successive seeds.
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full experiment and write the report bundle.
    Audit {
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-render a saved `result.json`.
    Report {
        #[arg(long)]
        result: PathBuf,
        #[arg(long, default_value = "md")]
        format: ReportFormat,
    },
}

fn load_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    ExperimentConfig::from_file(path).with_context(|| format!("reading config {}", path.display()))
}

fn train(config: &Path, seed: u64, out: Option<PathBuf>) -> anyhow::Result<ExitCode> {
    let cfg = load_config(config)?;
    let data = cfg.dataset.load()?;
    let (xtr, _, models) = prepare_trial(&cfg, &data, seed)?;
    let dir = out.unwrap_or_else(|| cfg.output_dir.join("models"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for (kind, model) in cfg.model_kinds.iter().zip(&models) {
        let tc = cfg
            .train
            .clone()
            .with_seed(xaudit::harness::model_seed(seed, *kind));
        let ckpt = Checkpoint::new(model, &tc, seed, xtr.feature_names.clone());
        let path = dir.join(format!("model_{}_trial_{seed}.json", kind.name()));
        ckpt.save(&path)?;
        println!("{}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn explain(
    config: &Path,
    model_path: &Path,
    method: Method,
    seed: Option<u64>,
    replicates: usize,
    out: Option<PathBuf>,
) -> anyhow::Result<ExitCode> {
    if replicates == 0 {
        bail!("--replicates must be at least 1");
    }
    let cfg = load_config(config)?;
    let ckpt = Checkpoint::load(model_path)?;
    let model = ckpt.model()?;
    let trial = seed.unwrap_or(ckpt.seed);
    let data = cfg.dataset.load()?;
    let (train, test) = stratified_split(&data, cfg.test_fraction, split_seed(trial))?;
    let (xtr, xte) = encode_features(&train, &test)?;
    if xte.d() != model.input_dim()
        || (!ckpt.feature_names.is_empty() && ckpt.feature_names != xte.feature_names)
    {
        bail!("checkpoint features do not match the encoded dataset");
    }
    let mut ecfg = cfg.explainer_config.clone();
    if ecfg.kernelshap.background.is_none() {
        ecfg.kernelshap.background = Some(xtr.column_means());
    }
    ecfg.validate(xte.d())?;
    let mut rows = Vec::with_capacity(xte.n() * replicates);
    for i in 0..xte.n() {
        let base = instance_seed(trial, method.id(), i as u64, 0);
        for r in 0..replicates {
            let e = explain_instance(
                method,
                &model,
                &xte.row(i),
                i,
                &ecfg,
                base.wrapping_add(r as u64),
            )?;
            rows.push((e, r));
        }
    }
    match out {
        Some(path) => {
            let file =
                fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            write_explanations_csv(file, &xte.feature_names, &rows)?;
        }
        None => write_explanations_csv(io::stdout().lock(), &xte.feature_names, &rows)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn audit(config: &Path) -> anyhow::Result<ExitCode> {
    let cfg = load_config(config)?;
    let result = run_experiment(&cfg)?;
    let dir = &cfg.output_dir;
    emit_report(&result, dir, &ReportFormat::ALL)?;
    write_samples(&result, dir)?;
    let secs = result.metadata.wall_time.map_or(0.0, |d| d.as_secs_f64());
    let log = serde_json::json!({
        "config_hash": result.metadata.config_hash,
        "wall_time_seconds": secs,
    });
    let log_path = dir.join("run_log.json");
    fs::write(&log_path, format!("{log:#}\n"))
        .with_context(|| format!("writing {}", log_path.display()))?;
    let c = &result.counts;
    println!(
        "{}: {}/{} cells significant at alpha = {}; report in {}",
        result.metadata.dataset,
        c.significant_cells,
        c.total_cells,
        c.alpha,
        dir.display()
    );
    Ok(if result.any_significant() {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn report(path: &Path, format: ReportFormat) -> anyhow::Result<ExitCode> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let result: ExperimentResult = serde_json::from_str(&text)?;
    io::stdout()
        .lock()
        .write_all(render(&result, format)?.as_bytes())?;
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Train { config, seed, out } => train(&config, seed, out),
        Command::Explain {
            config,
            model,
            method,
            seed,
            replicates,
            out,
        } => explain(&config, &model, method, seed, replicates, out),
        Command::Audit { config } => audit(&config),
        Command::Report { result, format } => report(&result, format),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match thread_pool_from_env() {
        Ok(Some(pool)) => pool.install(|| run(cli)),
        Ok(None) => run(cli),
        Err(e) => Err(e.into()),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
