//! Experiment bundles: a directory holding the configuration, the data
//! splits, the calibrated monitor and the reports of one seeded run.
//!
//! ```text
//! <bundle>/manifest/     kind "bundle": config, hash, seed, code version
//! <bundle>/data/{train,calib,test,val}/
//! <bundle>/monitor/      network checkpoint
//! <bundle>/calibration/  calibration scores and rejection rule
//! <bundle>/reports/      CSV and JSON outputs of the commands
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use npmon_core::data::{self, Dataset};
use npmon_core::nets::Examples;
use npmon_core::runtime::CalibratedMonitor;
use npmon_core::store;

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");
const MANIFEST_KIND: &str = "bundle";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub seed: u64,
    pub code_version: String,
    /// Where the source dataset was read from, if anywhere.
    pub source: Option<String>,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig, seed: u64, source: Option<String>) -> Self {
        Self {
            config_hash: config.hash(),
            config: config.clone(),
            seed,
            code_version: CODE_VERSION.into(),
            source,
        }
    }
}

/// Train, calibration, test and validation data sharing the train scaler.
#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub calib: Dataset,
    pub test: Dataset,
    pub val: Dataset,
}

fn scaled(ds: &Dataset) -> Examples {
    Examples::from_dataset(ds, ds.scaler().expect("split datasets carry the train scaler"))
}

impl Splits {
    pub fn train_examples(&self) -> Examples {
        scaled(&self.train)
    }

    pub fn calib_examples(&self) -> Examples {
        scaled(&self.calib)
    }

    pub fn test_examples(&self) -> Examples {
        scaled(&self.test)
    }

    pub fn val_examples(&self) -> Option<Examples> {
        (!self.val.is_empty()).then(|| scaled(&self.val))
    }

    fn parts(&self) -> [(&'static str, &Dataset); 4] {
        [
            ("train", &self.train),
            ("calib", &self.calib),
            ("test", &self.test),
            ("val", &self.val),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub manifest: Manifest,
    pub splits: Splits,
    pub calibrated: CalibratedMonitor,
}

fn require_dir(dir: &Path) -> Result<(), CliError> {
    if !dir.is_dir() {
        return Err(CliError::missing(dir, "no such directory"));
    }
    Ok(())
}

impl Bundle {
    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        store::write(&dir.join("manifest"), MANIFEST_KIND, &self.manifest, &[])?;
        for (name, ds) in self.splits.parts() {
            data::save(ds, &dir.join("data").join(name))?;
        }
        self.calibrated.save(dir)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, CliError> {
        require_dir(dir)?;
        let (manifest, _): (Manifest, _) = store::read(&dir.join("manifest"), MANIFEST_KIND)?;
        if manifest.config_hash != manifest.config.hash() {
            return Err(CliError::Integrity(format!(
                "{}: configuration does not match its recorded hash",
                dir.display()
            )));
        }
        let load = |name: &str| data::load(&dir.join("data").join(name));
        let splits = Splits {
            train: load("train")?,
            calib: load("calib")?,
            test: load("test")?,
            val: load("val")?,
        };
        let calibrated = CalibratedMonitor::load(dir)?;
        Ok(Self {
            manifest,
            splits,
            calibrated,
        })
    }

    pub fn reports_dir(dir: &Path) -> PathBuf {
        dir.join("reports")
    }
}
