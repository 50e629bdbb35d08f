//! Experiment configuration, read from a TOML document and validated before
//! any work starts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use npmon_core::data::GenMode;
use npmon_core::detection::MIN_FOLD;
use npmon_core::models::by_name;
use npmon_core::nets::{MonitorKind, Profile};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: String,
    pub mode: GenMode,
    pub approach: MonitorKind,
    pub profile: Profile,
    pub seeds: Vec<u64>,
    /// Significance levels reported by `eval`.
    pub eps: Vec<f64>,
    pub n_train: usize,
    pub n_calib: usize,
    pub n_test: usize,
    /// Held-out windows guarding the two-step fine-tuning phase.
    pub n_val: usize,
    /// Sliding windows cut from each trajectory in sequential mode.
    pub windows_per_traj: usize,
    /// Multiplies every epoch count of the profile's schedule.
    pub epoch_scale: f64,
    pub k_folds: usize,
    pub svc_lambda: f64,
    pub active: ActiveSettings,
    /// Factor applied to the observation noise standard deviation.
    pub anomaly_noise_scale: f64,
    pub paths: Paths,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActiveSettings {
    pub pool: usize,
    pub iters: usize,
    /// Share of queried points added to training; defaults to the current
    /// train share of the labelled data.
    pub split_fraction: Option<f64>,
    pub warm_start: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub bundle: Option<PathBuf>,
}

impl Default for ActiveSettings {
    fn default() -> Self {
        Self {
            pool: 5000,
            iters: 1,
            split_fraction: None,
            warm_start: true,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: "ip".into(),
            mode: GenMode::Independent,
            approach: MonitorKind::TwoStep,
            profile: Profile::Desk,
            seeds: vec![1],
            eps: vec![0.05],
            n_train: 5000,
            n_calib: 1000,
            n_test: 1000,
            n_val: 500,
            windows_per_traj: 100,
            epoch_scale: 1.0,
            k_folds: 5,
            svc_lambda: 1e-3,
            active: ActiveSettings::default(),
            anomaly_noise_scale: 5.0,
            paths: Paths::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::missing(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => invalid(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        by_name(&self.model).map_err(|e| invalid(e.to_string()))?;
        if self.seeds.is_empty() {
            return Err(invalid("at least one seed is required"));
        }
        validate_eps(&self.eps)?;
        if self.n_train == 0 || self.n_test == 0 {
            return Err(invalid("training and test sets must be nonempty"));
        }
        if self.k_folds < 2 {
            return Err(invalid("k_folds must be at least 2"));
        }
        if self.n_calib < self.k_folds * MIN_FOLD {
            return Err(invalid(format!(
                "n_calib {} is below {} ({} folds of {MIN_FOLD})",
                self.n_calib,
                self.k_folds * MIN_FOLD,
                self.k_folds
            )));
        }
        if self.windows_per_traj == 0 {
            return Err(invalid("windows_per_traj must be positive"));
        }
        if self.mode == GenMode::Sequential {
            for (name, n) in self.split_sizes() {
                if n % self.windows_per_traj != 0 {
                    return Err(invalid(format!(
                        "{name} = {n} is not a multiple of windows_per_traj = {}",
                        self.windows_per_traj
                    )));
                }
            }
        }
        if !(self.epoch_scale >= 0.0 && self.epoch_scale.is_finite()) {
            return Err(invalid("epoch_scale must be a nonnegative number"));
        }
        if !(self.svc_lambda > 0.0 && self.svc_lambda.is_finite()) {
            return Err(invalid("svc_lambda must be positive"));
        }
        if let Some(f) = self.active.split_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(invalid("active.split_fraction must lie in [0, 1]"));
            }
        }
        if !(self.anomaly_noise_scale >= 0.0 && self.anomaly_noise_scale.is_finite()) {
            return Err(invalid("anomaly_noise_scale must be a nonnegative number"));
        }
        Ok(())
    }

    pub fn split_sizes(&self) -> [(&'static str, usize); 4] {
        [
            ("n_train", self.n_train),
            ("n_calib", self.n_calib),
            ("n_test", self.n_test),
            ("n_val", self.n_val),
        ]
    }

    pub fn total_samples(&self) -> usize {
        self.n_train + self.n_calib + self.n_test + self.n_val
    }

    /// Short digest of the canonical JSON form, carried by every report row.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }
}

pub fn validate_eps(eps: &[f64]) -> Result<(), CliError> {
    if eps.is_empty() {
        return Err(invalid("at least one significance level is required"));
    }
    if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(invalid(format!("significance {e} outside (0, 1)")));
    }
    Ok(())
}
