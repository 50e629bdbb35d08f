//! Reachability-labelled datasets of (observation window, state window, label).
//!
//! Two sampling schemes are supported. *Independent* samples each start from a
//! fresh initial state. *Sequential* samples are overlapping stride-1 windows
//! cut from long trajectories, so neighbouring samples share states.
//!
//! Stored windows hold `f32` values. Labels and observations are computed from
//! the stored (rounded) states so every sample is self-consistent.

mod io;
mod scale;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{HybridState, HybridSystemSpec, Trajectory};
use crate::reach::{reach_label, ReachLabel};
use crate::rng::{self, substream, Rng};

pub use io::{load, save};
pub use scale::{Range, Scaler};

/// Default simulated sequence length; the last `H_p + 1` steps form a sample.
pub const DEFAULT_SEQ_LEN: usize = 32;
const MAX_RETRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenMode {
    Independent,
    Sequential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// `window x obs_dim`, time-major.
    pub obs: Vec<f32>,
    /// `window x state_dim`, time-major.
    pub states: Vec<f32>,
    /// Mode at each time step of the window.
    pub modes: Vec<u8>,
    pub label: ReachLabel,
    /// Source trajectory; equals the sample index for independent data.
    pub traj: u32,
}

impl Sample {
    /// Hybrid state at window position `t` (unscaled).
    pub fn state_at(&self, t: usize, state_dim: usize) -> HybridState {
        let v = self.states[t * state_dim..(t + 1) * state_dim]
            .iter()
            .map(|&x| f64::from(x))
            .collect();
        HybridState::new(v, u32::from(self.modes[t]))
    }

    pub fn last_state(&self, state_dim: usize) -> HybridState {
        let window = self.modes.len();
        self.state_at(window - 1, state_dim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub model: String,
    pub mode: GenMode,
    pub window: usize,
    pub state_dim: usize,
    pub obs_dim: usize,
    pub seq_len: usize,
    pub seed: u64,
    pub samples: Vec<Sample>,
    /// Fitted on the training split; `None` until [`Dataset::fit_scaler`].
    pub scaler: Option<Scaler>,
}

impl Dataset {
    pub fn empty_like(&self) -> Self {
        Self {
            samples: Vec::new(),
            ..self.clone()
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<ReachLabel> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn positive_fraction(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let pos = self.samples.iter().filter(|s| s.label == ReachLabel::Unsafe).count();
        pos as f64 / self.samples.len() as f64
    }

    /// Fits per-dimension min/max on this dataset and stores it.
    pub fn fit_scaler(&mut self) {
        self.scaler = Some(Scaler::fit(self));
    }

    pub fn with_scaler(mut self, scaler: Scaler) -> Self {
        self.scaler = Some(scaler);
        self
    }

    pub fn scaler(&self) -> Result<&Scaler> {
        self.scaler
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("dataset has no fitted scaler".into()))
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            samples: idx.iter().map(|&i| self.samples[i].clone()).collect(),
            ..self.clone()
        }
    }

    pub fn extend(&mut self, other: &Dataset) {
        self.samples.extend(other.samples.iter().cloned());
    }

    /// Multiplies the observation noise of every sample by `factor`, keeping
    /// the draws: each observation becomes `mean + factor * (obs - mean)`.
    /// A factor of one returns the data unchanged.
    pub fn scale_noise(&self, spec: &HybridSystemSpec, factor: f64) -> Self {
        let mut out = self.clone();
        for s in &mut out.samples {
            for t in 0..self.window {
                let mean = spec.observe_mean(&s.state_at(t, self.state_dim));
                let row = &mut s.obs[t * self.obs_dim..(t + 1) * self.obs_dim];
                for (y, m) in row.iter_mut().zip(mean) {
                    *y = (m + factor * (f64::from(*y) - m)) as f32;
                }
            }
        }
        out
    }
}

fn round_state(s: &HybridState) -> HybridState {
    HybridState::new(s.v.iter().map(|&x| f64::from(x as f32)).collect(), s.q)
}

fn diverged_retry<T>(mut attempt: impl FnMut() -> Result<T>) -> Result<T> {
    let mut last = String::new();
    for _ in 0..MAX_RETRIES {
        match attempt() {
            Ok(v) => return Ok(v),
            Err(e @ Error::IntegrationDiverged { .. }) => last = e.to_string(),
            Err(e) => return Err(e),
        }
    }
    Err(Error::GenerationFailed {
        attempts: MAX_RETRIES,
        reason: last,
    })
}

/// Rounded states of `traj` with one noisy observation each.
struct ObservedRun {
    states: Vec<HybridState>,
    obs: Vec<Vec<f64>>,
}

fn observe_run(spec: &HybridSystemSpec, traj: &Trajectory, rng: &mut Rng) -> ObservedRun {
    let states: Vec<HybridState> = traj.states.iter().map(round_state).collect();
    let obs = states.iter().map(|s| spec.observe(s, rng)).collect();
    ObservedRun { states, obs }
}

fn make_sample(spec: &HybridSystemSpec, run: &ObservedRun, end: usize, traj: u32) -> Result<Sample> {
    let window = spec.window();
    let start = end + 1 - window;
    let mut sample = Sample {
        obs: Vec::with_capacity(window * spec.obs_dim),
        states: Vec::with_capacity(window * spec.state_dim),
        modes: Vec::with_capacity(window),
        label: ReachLabel::Safe,
        traj,
    };
    for t in start..=end {
        sample.states.extend(run.states[t].v.iter().map(|&x| x as f32));
        sample.obs.extend(run.obs[t].iter().map(|&x| x as f32));
        sample.modes.push(run.states[t].q as u8);
    }
    sample.label = reach_label(spec, &run.states[end])?;
    Ok(sample)
}

fn base_dataset(spec: &HybridSystemSpec, mode: GenMode, seq_len: usize, seed: u64) -> Dataset {
    Dataset {
        model: spec.name.clone(),
        mode,
        window: spec.window(),
        state_dim: spec.state_dim,
        obs_dim: spec.obs_dim,
        seq_len,
        seed,
        samples: Vec::new(),
        scaler: None,
    }
}

/// `n` independent samples. Sample `i` uses its own substream of `seed`, so
/// the result does not depend on generation order.
pub fn gen_independent(spec: &HybridSystemSpec, n: usize, seq_len: usize, seed: u64) -> Result<Dataset> {
    if seq_len < spec.window() {
        return Err(Error::InvalidArgument(format!(
            "sequence length {seq_len} shorter than the window {}",
            spec.window()
        )));
    }
    let mut ds = base_dataset(spec, GenMode::Independent, seq_len, seed);
    ds.samples.reserve(n);
    for i in 0..n {
        ds.samples.push(independent_sample(spec, seq_len, seed, i)?);
    }
    Ok(ds)
}

/// The `index`-th sample of [`gen_independent`] for `seed`.
pub fn independent_sample(spec: &HybridSystemSpec, seq_len: usize, seed: u64, index: usize) -> Result<Sample> {
    let mut rng = substream(seed, index as u64);
    let run = diverged_retry(|| {
        let s0 = spec.sample_initial(&mut rng);
        spec.simulate(&s0, seq_len - 1)
    })?;
    let run = observe_run(spec, &run, &mut rng);
    make_sample(spec, &run, seq_len - 1, index as u32)
}

/// `n_init` long trajectories, each cut into `windows_per_traj` stride-1
/// windows of `seq_len` states. Window `k` of a trajectory ends at state
/// `k + seq_len - 1`.
pub fn gen_sequential(
    spec: &HybridSystemSpec,
    n_init: usize,
    windows_per_traj: usize,
    seq_len: usize,
    seed: u64,
) -> Result<Dataset> {
    if windows_per_traj == 0 {
        return Err(Error::InvalidArgument("windows_per_traj must be >= 1".into()));
    }
    if seq_len < spec.window() {
        return Err(Error::InvalidArgument(format!(
            "sequence length {seq_len} shorter than the window {}",
            spec.window()
        )));
    }
    let mut ds = base_dataset(spec, GenMode::Sequential, seq_len, seed);
    ds.samples.reserve(n_init * windows_per_traj);
    for j in 0..n_init {
        let run = sequential_run(spec, windows_per_traj, seq_len, seed, j)?;
        for k in 0..windows_per_traj {
            ds.samples.push(make_sample(spec, &run, k + seq_len - 1, j as u32)?);
        }
    }
    Ok(ds)
}

fn sequential_run(
    spec: &HybridSystemSpec,
    windows_per_traj: usize,
    seq_len: usize,
    seed: u64,
    j: usize,
) -> Result<ObservedRun> {
    let mut rng = substream(seed, j as u64);
    let traj = diverged_retry(|| {
        let s0 = spec.sample_initial(&mut rng);
        spec.simulate(&s0, windows_per_traj - 1 + seq_len - 1)
    })?;
    Ok(observe_run(spec, &traj, &mut rng))
}

/// Underlying (rounded) states of trajectory `j` of [`gen_sequential`].
pub fn sequential_trajectory(
    spec: &HybridSystemSpec,
    windows_per_traj: usize,
    seq_len: usize,
    seed: u64,
    j: usize,
) -> Result<Vec<HybridState>> {
    Ok(sequential_run(spec, windows_per_traj, seq_len, seed, j)?.states)
}

/// Disjoint train/calibration/test splits drawn at random. Sequential data is
/// split by source trajectory; each count must then be a multiple of the
/// number of windows per trajectory.
pub fn split(
    ds: &Dataset,
    n_train: usize,
    n_calib: usize,
    n_test: usize,
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    use rand::seq::SliceRandom;

    let total = n_train + n_calib + n_test;
    if total > ds.len() {
        return Err(Error::InsufficientData(format!(
            "requested {total} samples from a dataset of {}",
            ds.len()
        )));
    }
    let mut rng = substream(seed, rng::stream::SPLIT);
    let groups: Vec<Vec<usize>> = match ds.mode {
        GenMode::Independent => (0..ds.len()).map(|i| vec![i]).collect(),
        GenMode::Sequential => {
            let mut by_traj: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
            for (i, s) in ds.samples.iter().enumerate() {
                by_traj.entry(s.traj).or_default().push(i);
            }
            by_traj.into_values().collect()
        }
    };
    let per_group = groups.first().map_or(1, |g| g.len());
    if groups.iter().any(|g| g.len() != per_group) {
        return Err(Error::InvalidArgument("trajectories have unequal window counts".into()));
    }
    for count in [n_train, n_calib, n_test] {
        if count % per_group != 0 {
            return Err(Error::InvalidArgument(format!(
                "split size {count} is not a multiple of {per_group} windows per trajectory"
            )));
        }
    }
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = order.into_iter();
    let mut take = |count: usize| -> Dataset {
        let idx: Vec<usize> = cursor
            .by_ref()
            .take(count / per_group)
            .flat_map(|g| groups[g].iter().copied())
            .collect();
        ds.subset(&idx)
    };
    let train = take(n_train);
    let calib = take(n_calib);
    let test = take(n_test);
    Ok((train, calib, test))
}
