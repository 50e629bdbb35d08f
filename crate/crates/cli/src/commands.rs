//! The subcommands behind the `npmon` binary. Each reads its inputs from
//! disk, runs one pipeline stage and writes its reports under the bundle.

use std::path::{Path, PathBuf};

use serde::Serialize;

use npmon_core::data::{self, GenMode};
use npmon_core::nets::{MonitorKind, Profile};

use crate::bundle::Bundle;
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::pipeline;
use crate::reports::{active_row, metrics_rows, write_csv, write_json, MetricsRow};

pub fn gen(
    model: &str,
    mode: GenMode,
    n: usize,
    windows_per_traj: usize,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let ds = pipeline::generate(model, mode, n, windows_per_traj, seed)?;
    data::save(&ds, out)?;
    log::info!(
        "wrote {} {model} samples ({:.1}% positive) to {}",
        ds.len(),
        100.0 * ds.positive_fraction(),
        out.display()
    );
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct TrainArgs {
    pub data: PathBuf,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
    pub approach: Option<MonitorKind>,
    pub profile: Option<Profile>,
    pub seed: Option<u64>,
}

/// Trains one bundle per seed. With a single seed the bundle is `out`
/// itself; otherwise each seed gets `out/seed-<n>`.
pub fn train(args: &TrainArgs) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(a) = args.approach {
        cfg.approach = a;
    }
    if let Some(p) = args.profile {
        cfg.profile = p;
    }
    if let Some(s) = args.seed {
        cfg.seeds = vec![s];
    }
    let ds = data::load(&args.data)?;
    let cfg = pipeline::config_for_dataset(cfg, &ds)?;
    let source = Some(args.data.display().to_string());
    let mut dirs = Vec::new();
    for &seed in &cfg.seeds {
        let dir = if cfg.seeds.len() == 1 {
            args.out.clone()
        } else {
            args.out.join(format!("seed-{seed}"))
        };
        let (bundle, summary) = pipeline::train(&cfg, &ds, seed, source.clone())?;
        bundle.save(&dir)?;
        write_json(&Bundle::reports_dir(&dir).join("train.json"), &summary)?;
        log::info!(
            "seed {seed}: test accuracy {:.4}, bundle {}",
            summary.test_accuracy,
            dir.display()
        );
        dirs.push(dir);
    }
    Ok(dirs)
}

fn write_table<T: Serialize>(dir: &Path, stem: &str, rows: &[T]) -> Result<(), CliError> {
    let reports = Bundle::reports_dir(dir);
    write_csv(&reports.join(format!("{stem}.csv")), rows)?;
    write_json(&reports.join(format!("{stem}.json")), &rows)
}

/// Writes `reports/eval.{csv,json}`, one row per significance level.
pub fn eval(dir: &Path, eps: Option<&[f64]>) -> Result<Vec<MetricsRow>, CliError> {
    let bundle = Bundle::load(dir)?;
    let eps = eps.unwrap_or(&bundle.manifest.config.eps);
    let evaluation = pipeline::evaluate(&bundle, eps)?;
    let rows = metrics_rows(&bundle.manifest, "test", &evaluation);
    write_table(dir, "eval", &rows)?;
    Ok(rows)
}

/// Writes `reports/active.{csv,json}` and the retrained monitor to
/// `<bundle>/active/`.
pub fn active(dir: &Path, pool: Option<usize>, iters: Option<usize>) -> Result<(), CliError> {
    let bundle = Bundle::load(dir)?;
    let cfg = &bundle.manifest.config;
    let pool = pool.unwrap_or(cfg.active.pool);
    let iters = iters.unwrap_or(cfg.active.iters);
    let outcome = pipeline::active(&bundle, pool, iters)?;
    let rows: Vec<_> = outcome
        .history()
        .iter()
        .map(|r| active_row(&bundle.manifest, outcome.eps, r))
        .collect();
    write_table(dir, "active", &rows)?;
    outcome.state.calibrated.save(&dir.join("active"))?;
    Ok(())
}

/// Writes `reports/anomaly.{csv,json}` with paired clean and anomalous rows.
pub fn anomaly(dir: &Path, noise_scale: Option<f64>) -> Result<Vec<MetricsRow>, CliError> {
    let bundle = Bundle::load(dir)?;
    let scale = noise_scale.unwrap_or(bundle.manifest.config.anomaly_noise_scale);
    let (clean, noisy) = pipeline::anomaly(&bundle, scale)?;
    let mut rows = metrics_rows(&bundle.manifest, "clean", &clean);
    rows.extend(metrics_rows(&bundle.manifest, "anomaly", &noisy));
    write_table(dir, "anomaly", &rows)?;
    Ok(rows)
}

/// Writes `reports/estimation.{csv,json}`.
pub fn compare_se(dir: &Path) -> Result<(), CliError> {
    let bundle = Bundle::load(dir)?;
    let row = pipeline::compare_se(&bundle)?;
    log::info!(
        "relative error: learned estimator {:.4}, filter {:.4}",
        row.nse_relative_error,
        row.ukf_relative_error
    );
    write_table(dir, "estimation", &[row])
}
