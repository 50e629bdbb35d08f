//! Report rows written as CSV tables and JSON documents.
//!
//! Every row carries the configuration hash, seed and code version of the
//! run it came from. Rates are fractions in `[0, 1]`; `fn_detected` and
//! `fp_detected` are `detected/total` counts. Unbounded state regions have
//! an infinite width (`inf` in CSV, `null` in JSON).

use std::fs;
use std::path::Path;

use serde::Serialize;

use npmon_core::active::{AlRecord, Snapshot};
use npmon_core::runtime::Evaluation;

use crate::bundle::Manifest;
use crate::error::CliError;

/// One line of the accuracy / detection / rejection / coverage tables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub config_hash: String,
    pub code_version: String,
    pub seed: u64,
    pub model: String,
    pub mode: String,
    pub approach: String,
    pub profile: String,
    pub stage: String,
    pub eps: f64,
    pub n: usize,
    pub accuracy: f64,
    pub detection_rate: f64,
    pub fn_detected: String,
    pub fp_detected: String,
    pub rejection_rate: f64,
    pub accepted_error_rate: f64,
    pub coverage: f64,
    pub efficiency: f64,
    pub state_coverage: Option<f64>,
    pub state_width: Option<f64>,
}

fn label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v).expect("enum serializes") {
        serde_json::Value::String(s) => s,
        other => other.to_string(),
    }
}

/// One row per significance level of `eval`.
pub fn metrics_rows(manifest: &Manifest, stage: &str, eval: &Evaluation) -> Vec<MetricsRow> {
    let cfg = &manifest.config;
    let d = &eval.detection;
    eval.per_eps
        .iter()
        .map(|m| MetricsRow {
            config_hash: manifest.config_hash.clone(),
            code_version: manifest.code_version.clone(),
            seed: manifest.seed,
            model: cfg.model.clone(),
            mode: label(&cfg.mode),
            approach: label(&cfg.approach),
            profile: label(&cfg.profile),
            stage: stage.into(),
            eps: m.eps,
            n: d.n,
            accuracy: d.accuracy,
            detection_rate: d.detection_rate,
            fn_detected: d.fn_ratio(),
            fp_detected: d.fp_ratio(),
            rejection_rate: d.rejection_rate,
            accepted_error_rate: d.accepted_error_rate,
            coverage: m.coverage,
            efficiency: m.efficiency,
            state_coverage: m.state_coverage,
            state_width: m.state_width,
        })
        .collect()
}

/// Before/after metrics of one active-learning iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActiveRow {
    pub config_hash: String,
    pub code_version: String,
    pub seed: u64,
    pub model: String,
    pub iteration: usize,
    pub selected: usize,
    pub added_train: usize,
    pub added_calib: usize,
    pub eps: f64,
    pub accuracy_before: f64,
    pub accuracy_after: f64,
    pub detection_before: f64,
    pub detection_after: f64,
    pub rejection_before: f64,
    pub rejection_after: f64,
    pub coverage_before: f64,
    pub coverage_after: f64,
    pub efficiency_before: f64,
    pub efficiency_after: f64,
}

pub fn active_row(manifest: &Manifest, eps: f64, r: &AlRecord) -> ActiveRow {
    let (b, a): (&Snapshot, &Snapshot) = (&r.before, &r.after);
    ActiveRow {
        config_hash: manifest.config_hash.clone(),
        code_version: manifest.code_version.clone(),
        seed: manifest.seed,
        model: manifest.config.model.clone(),
        iteration: r.iteration,
        selected: r.selected,
        added_train: r.added_train,
        added_calib: r.added_calib,
        eps,
        accuracy_before: b.accuracy,
        accuracy_after: a.accuracy,
        detection_before: b.detection_rate,
        detection_after: a.detection_rate,
        rejection_before: b.rejection_rate,
        rejection_after: a.rejection_rate,
        coverage_before: b.coverage,
        coverage_after: a.coverage,
        efficiency_before: b.efficiency,
        efficiency_after: a.efficiency,
    }
}

/// Mean relative reconstruction error of the learned estimator and the
/// filter baseline on the test set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationRow {
    pub config_hash: String,
    pub code_version: String,
    pub seed: u64,
    pub model: String,
    pub n: usize,
    pub nse_relative_error: f64,
    pub ukf_relative_error: f64,
    /// Test sequences on which the filter diverged; left out of its mean.
    pub ukf_failures: usize,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}
