//! The experiment workflow as library functions: generate data, train and
//! calibrate a monitor, evaluate it, run active learning, replay the test
//! set under an anomaly and compare state estimators.

use serde::Serialize;

use npmon_core::active::{al_iteration, AlConfig, AlRecord, AlState};
use npmon_core::data::{gen_independent, gen_sequential, split, Dataset, GenMode, DEFAULT_SEQ_LEN};
use npmon_core::detection::SvcOpts;
use npmon_core::models::{by_name, HybridSystemSpec};
use npmon_core::nets::{Examples, MonitorModel};
use npmon_core::rng::stream;
use npmon_core::runtime::{CalibratedMonitor, CalibrationOpts, Evaluation};
use npmon_core::ukf::{relative_error, ukf_estimate, UkfConfig};
use npmon_core::Error;

use crate::bundle::{Bundle, Manifest, Splits};
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::reports::EstimationRow;

/// `n` samples of `model`. Sequential data comes as `n / windows_per_traj`
/// trajectories, so `n` must be a multiple of `windows_per_traj`.
pub fn generate(model: &str, mode: GenMode, n: usize, windows_per_traj: usize, seed: u64) -> Result<Dataset, CliError> {
    let spec = by_name(model)?;
    generate_for(&spec, mode, n, windows_per_traj, seed)
}

fn generate_for(
    spec: &HybridSystemSpec,
    mode: GenMode,
    n: usize,
    windows_per_traj: usize,
    seed: u64,
) -> Result<Dataset, CliError> {
    if n == 0 {
        return Err(CliError::Config("dataset size must be positive".into()));
    }
    Ok(match mode {
        GenMode::Independent => gen_independent(spec, n, DEFAULT_SEQ_LEN, seed)?,
        GenMode::Sequential => {
            if windows_per_traj == 0 || !n.is_multiple_of(windows_per_traj) {
                return Err(CliError::Config(format!(
                    "{n} windows are not a whole number of trajectories of {windows_per_traj}"
                )));
            }
            gen_sequential(spec, n / windows_per_traj, windows_per_traj, DEFAULT_SEQ_LEN, seed)?
        }
    })
}

/// Windows cut from each trajectory of a sequential dataset.
pub fn windows_per_trajectory(ds: &Dataset) -> usize {
    match (ds.mode, ds.samples.first()) {
        (GenMode::Sequential, Some(first)) => ds.samples.iter().filter(|s| s.traj == first.traj).count(),
        _ => 1,
    }
}

/// Adapts `cfg` to the dataset it will be trained on.
pub fn config_for_dataset(mut cfg: ExperimentConfig, ds: &Dataset) -> Result<ExperimentConfig, CliError> {
    cfg.model = ds.model.clone();
    cfg.mode = ds.mode;
    if ds.mode == GenMode::Sequential {
        cfg.windows_per_traj = windows_per_trajectory(ds);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Random disjoint splits; every part is scaled with the training ranges.
pub fn make_splits(cfg: &ExperimentConfig, ds: &Dataset, seed: u64) -> Result<Splits, CliError> {
    if cfg.total_samples() > ds.len() {
        return Err(CliError::Config(format!(
            "the configuration needs {} samples but the dataset holds {}",
            cfg.total_samples(),
            ds.len()
        )));
    }
    let (mut train, calib, rest) = split(ds, cfg.n_train, cfg.n_calib, cfg.n_test + cfg.n_val, seed)?;
    train.fit_scaler();
    let scaler = train.scaler()?.clone();
    let test: Vec<usize> = (0..cfg.n_test).collect();
    let val: Vec<usize> = (cfg.n_test..rest.len()).collect();
    Ok(Splits {
        calib: calib.with_scaler(scaler.clone()),
        test: rest.subset(&test).with_scaler(scaler.clone()),
        val: rest.subset(&val).with_scaler(scaler),
        train,
    })
}

pub fn calibration_opts(cfg: &ExperimentConfig, seed: u64) -> CalibrationOpts {
    CalibrationOpts {
        k_folds: cfg.k_folds,
        svc: SvcOpts {
            lambda: cfg.svc_lambda,
            ..SvcOpts::default()
        },
        seed,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub config_hash: String,
    pub seed: u64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub fine_tune_reverted: bool,
    pub losses: std::collections::BTreeMap<String, Vec<f64>>,
}

/// Splits `ds`, trains and calibrates a monitor.
pub fn train(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    seed: u64,
    source: Option<String>,
) -> Result<(Bundle, TrainSummary), CliError> {
    let splits = make_splits(cfg, ds, seed)?;
    let schedule = cfg.profile.schedule(seed).scale_epochs(cfg.epoch_scale);
    let train_ex = splits.train_examples();
    let val_ex = splits.val_examples();
    let monitor = MonitorModel::train(cfg.approach, cfg.profile, &schedule, &train_ex, val_ex.as_ref(), seed)?;
    let test_ex = splits.test_examples();
    let calibrated = CalibratedMonitor::calibrate(monitor, &splits.calib_examples(), &calibration_opts(cfg, seed))?;
    let manifest = Manifest::new(cfg, seed, source);
    let m = &calibrated.monitor;
    let summary = TrainSummary {
        config_hash: manifest.config_hash.clone(),
        seed,
        train_accuracy: m.accuracy(&train_ex)?,
        test_accuracy: m.accuracy(&test_ex)?,
        fine_tune_reverted: m.meta.fine_tune_reverted,
        losses: m.meta.losses.clone(),
    };
    Ok((
        Bundle {
            manifest,
            splits,
            calibrated,
        },
        summary,
    ))
}

/// Test-set evaluation at every significance in `eps`. Tie-breaking draws
/// come from the bundle seed, so repeated calls agree exactly.
pub fn evaluate(bundle: &Bundle, eps: &[f64]) -> Result<Evaluation, CliError> {
    crate::config::validate_eps(eps)?;
    Ok(bundle
        .calibrated
        .evaluate(&bundle.splits.test_examples(), eps, bundle.manifest.seed)?)
}

#[derive(Debug, Clone)]
pub struct ActiveOutcome {
    pub state: AlState,
    pub eps: f64,
}

impl ActiveOutcome {
    pub fn history(&self) -> &[AlRecord] {
        &self.state.history
    }
}

/// `iters` rounds of active learning, each querying a fresh pool of
/// `pool` labelled windows drawn independently of the bundle's data.
pub fn active(bundle: &Bundle, pool: usize, iters: usize) -> Result<ActiveOutcome, CliError> {
    let cfg = &bundle.manifest.config;
    let seed = bundle.manifest.seed;
    let spec = by_name(&cfg.model)?;
    let scaler = bundle.splits.train.scaler()?.clone();
    let test = bundle.splits.test_examples();
    let mut state = AlState::new(
        bundle.calibrated.clone(),
        bundle.splits.train_examples(),
        bundle.splits.calib_examples(),
        &test,
    );
    let al = AlConfig {
        split_fraction: cfg.active.split_fraction.unwrap_or_else(|| state.train_fraction()),
        warm_start: cfg.active.warm_start,
        profile: cfg.profile,
        schedule: cfg.profile.schedule(seed).scale_epochs(cfg.epoch_scale),
        calibration: calibration_opts(cfg, seed),
        eps: cfg.eps[0],
        seed,
    };
    for it in 0..iters {
        let pool_seed = seed ^ stream::POOL ^ it as u64;
        let ds = generate_for(&spec, cfg.mode, pool, cfg.windows_per_traj, pool_seed)?.with_scaler(scaler.clone());
        let pool_ex = Examples::from_dataset(&ds, &scaler);
        state = al_iteration(state, &pool_ex, &test, &al)?;
    }
    Ok(ActiveOutcome { state, eps: al.eps })
}

/// Clean and anomalous evaluations of the test set. The anomaly multiplies
/// the observation noise of every test window by `noise_scale`.
pub fn anomaly(bundle: &Bundle, noise_scale: f64) -> Result<(Evaluation, Evaluation), CliError> {
    if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
        return Err(CliError::Config(format!(
            "noise scale {noise_scale} must be nonnegative"
        )));
    }
    let cfg = &bundle.manifest.config;
    let spec = by_name(&cfg.model)?;
    let test = &bundle.splits.test;
    let noisy = test.scale_noise(&spec, noise_scale);
    let scaler = test.scaler()?;
    let clean = evaluate(bundle, &cfg.eps)?;
    let anomalous =
        bundle
            .calibrated
            .evaluate(&Examples::from_dataset(&noisy, scaler), &cfg.eps, bundle.manifest.seed)?;
    Ok((clean, anomalous))
}

/// Mean relative reconstruction error of the learned estimator against the
/// unscented Kalman filter on the bundle's test windows.
pub fn compare_se(bundle: &Bundle) -> Result<EstimationRow, CliError> {
    let cfg = &bundle.manifest.config;
    let monitor = &bundle.calibrated.monitor;
    if monitor.estimator.is_none() {
        return Err(CliError::Config("state estimation needs a two-step bundle".into()));
    }
    let spec = by_name(&cfg.model)?;
    let test = &bundle.splits.test;
    let scaler = test.scaler()?;
    let ranges: Vec<f64> = scaler.states.iter().map(|r| r.max - r.min).collect();
    let ukf_cfg = UkfConfig::for_spec(&spec, &scaler.states);
    let ex = bundle.splits.test_examples();
    let rows = |flat: &[f64], dim: usize| flat.chunks(dim).map(<[f64]>::to_vec).collect::<Vec<_>>();
    let (mut nse_sum, mut ukf_sum, mut failures) = (0.0, 0.0, 0usize);
    for (s, obs) in test.samples.iter().zip(&ex.obs) {
        let truth: Vec<f64> = s.states.iter().map(|&x| f64::from(x)).collect();
        let truth = rows(&truth, spec.state_dim);
        let nse = rows(&monitor.estimate_physical(obs, scaler)?, spec.state_dim);
        nse_sum += relative_error(&truth, &nse, &ranges)?;
        let y: Vec<f64> = s.obs.iter().map(|&x| f64::from(x)).collect();
        match ukf_estimate(&spec, &rows(&y, spec.obs_dim), &ukf_cfg) {
            Ok(est) => ukf_sum += relative_error(&truth, &est, &ranges)?,
            Err(Error::FilterDiverged(msg)) => {
                log::warn!("filter diverged on a test window: {msg}");
                failures += 1;
            }
            Err(e) => return Err(e.into()),
        }
    }
    let n = test.len();
    if failures == n {
        return Err(CliError::Numeric("the filter diverged on every test window".into()));
    }
    Ok(EstimationRow {
        config_hash: bundle.manifest.config_hash.clone(),
        code_version: bundle.manifest.code_version.clone(),
        seed: bundle.manifest.seed,
        model: cfg.model.clone(),
        n,
        nse_relative_error: nse_sum / n as f64,
        ukf_relative_error: ukf_sum / (n - failures) as f64,
        ukf_failures: failures,
    })
}
