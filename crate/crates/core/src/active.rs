//! Uncertainty-aware active learning.
//!
//! Pool points whose predictions the rejection rule rejects are labelled and
//! added to the training and calibration sets at their current ratio. The
//! monitor is then retrained, recalibrated and given a new rule.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nets::{Examples, MonitorModel, Profile, Schedule};
use crate::rng::{self, substream};
use crate::runtime::{CalibratedMonitor, CalibrationOpts, Evaluation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlConfig {
    /// Fraction of the selected points that goes to training.
    pub split_fraction: f64,
    /// Continue from the current weights rather than reinitialising.
    pub warm_start: bool,
    pub profile: Profile,
    pub schedule: Schedule,
    pub calibration: CalibrationOpts,
    /// Significance at which coverage and efficiency are tracked.
    pub eps: f64,
    pub seed: u64,
}

/// Test metrics before and after one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlRecord {
    pub iteration: usize,
    pub selected: usize,
    pub added_train: usize,
    pub added_calib: usize,
    pub before: Snapshot,
    pub after: Snapshot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub accuracy: f64,
    pub detection_rate: f64,
    pub rejection_rate: f64,
    pub coverage: f64,
    pub efficiency: f64,
}

impl Snapshot {
    pub fn of(eval: &Evaluation, eps: f64) -> Self {
        let at = eval.at(eps).expect("evaluated at the tracked significance");
        Self {
            accuracy: eval.detection.accuracy,
            detection_rate: eval.detection.detection_rate,
            rejection_rate: eval.detection.rejection_rate,
            coverage: at.coverage,
            efficiency: at.efficiency,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlState {
    pub calibrated: CalibratedMonitor,
    pub train: Examples,
    pub calib: Examples,
    pub iteration: usize,
    pub history: Vec<AlRecord>,
    /// Digest of the test set, compared at every iteration.
    pub test_digest: String,
}

/// SHA-256 over the inputs and labels of a set of examples.
pub fn digest(ex: &Examples) -> String {
    let mut h = Sha256::new();
    for (o, l) in ex.obs.iter().zip(&ex.labels) {
        for x in o {
            h.update(x.to_le_bytes());
        }
        h.update([*l as u8]);
    }
    hex::encode(h.finalize())
}

impl AlState {
    pub fn new(calibrated: CalibratedMonitor, train: Examples, calib: Examples, test: &Examples) -> Self {
        Self {
            calibrated,
            train,
            calib,
            iteration: 0,
            history: Vec::new(),
            test_digest: digest(test),
        }
    }

    /// Train share of the labelled data, the default split for new points.
    pub fn train_fraction(&self) -> f64 {
        self.train.len() as f64 / (self.train.len() + self.calib.len()) as f64
    }
}

/// Indices of the pool points the current rule rejects, in pool order.
pub fn query(pool: &Examples, state: &AlState, seed: u64) -> Result<Vec<usize>> {
    if pool.is_empty() {
        return Err(Error::InsufficientData("empty pool".into()));
    }
    let mut rng = substream(seed, rng::stream::POOL);
    let mut out = Vec::new();
    for (i, obs) in pool.obs.iter().enumerate() {
        let theta: f64 = rng.gen();
        let (_, _, _, rejected) = state.calibrated.monitor_point(obs, theta)?;
        if rejected {
            out.push(i);
        }
    }
    Ok(out)
}

/// One round of querying, labelling (labels come with the pool), retraining
/// and recalibration. Metrics are measured on `test` before and after.
pub fn al_iteration(mut state: AlState, pool: &Examples, test: &Examples, config: &AlConfig) -> Result<AlState> {
    if digest(test) != state.test_digest {
        return Err(Error::InvalidArgument("test set changed between iterations".into()));
    }
    let eval_seed = config.seed;
    let before = Snapshot::of(&state.calibrated.evaluate(test, &[config.eps], eval_seed)?, config.eps);
    let mut selected = query(pool, &state, config.seed.wrapping_add(state.iteration as u64))?;
    state.iteration += 1;
    if selected.is_empty() {
        state.history.push(AlRecord {
            iteration: state.iteration,
            selected: 0,
            added_train: 0,
            added_calib: 0,
            before,
            after: before,
        });
        return Ok(state);
    }
    let mut rng = substream(config.seed, rng::stream::POOL + state.iteration as u64);
    selected.shuffle(&mut rng);
    let n_train = (selected.len() as f64 * config.split_fraction).round() as usize;
    let (to_train, to_calib) = selected.split_at(n_train);
    state.train.extend(&pool.subset(to_train));
    state.calib.extend(&pool.subset(to_calib));

    let monitor = if config.warm_start {
        let mut m = state.calibrated.monitor.clone();
        m.fit(&config.schedule, &state.train, None)?;
        m
    } else {
        MonitorModel::train(
            state.calibrated.monitor.kind,
            config.profile,
            &config.schedule,
            &state.train,
            None,
            config.seed,
        )?
    };
    state.calibrated = CalibratedMonitor::calibrate(monitor, &state.calib, &config.calibration)?;
    let after = Snapshot::of(&state.calibrated.evaluate(test, &[config.eps], eval_seed)?, config.eps);
    state.history.push(AlRecord {
        iteration: state.iteration,
        selected: selected.len(),
        added_train: to_train.len(),
        added_calib: to_calib.len(),
        before,
        after,
    });
    Ok(state)
}
