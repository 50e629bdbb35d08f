//! Benchmark hybrid systems and their discrete-time simulation.
//!
//! A system advances in steps of `dt`. Within one step the control input and
//! the mode are held constant and the continuous flow is integrated with
//! `substeps` classical RK4 steps. Mode switches use the pre-step state and
//! resets are applied to the post-integration state, once per step.

mod cvdp;
mod ip;
mod lalo;
mod linear;
mod registry;
mod sn;
mod twt;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

pub use cvdp::CoupledVanDerPol;
pub use ip::InvertedPendulum;
pub use lalo::LaubLoomis;
pub use linear::{load_linear_system, parse_linear_system, LinearSystem};
pub use registry::{by_name, MODEL_NAMES};
pub use sn::SpikingNeuron;
pub use twt::WaterTank;

/// A point of the hybrid state space: continuous variables plus a mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridState {
    pub v: Vec<f64>,
    pub q: u32,
}

impl HybridState {
    pub fn new(v: Vec<f64>, q: u32) -> Self {
        Self { v, q }
    }
}

/// Behaviour shared by all benchmark plants.
pub trait Plant {
    /// Control input for the coming step.
    fn control(&self, _v: &[f64], _q: u32) -> Vec<f64> {
        Vec::new()
    }

    /// Continuous dynamics in mode `q` with the held input `a`.
    fn derivative(&self, v: &[f64], q: u32, a: &[f64], dv: &mut [f64]);

    /// Mode for the next step, computed from the pre-step state.
    fn next_mode(&self, _v: &[f64], q: u32) -> u32 {
        q
    }

    /// Applies a reset to a post-integration state. Returns whether it fired.
    fn reset(&self, _v: &mut [f64]) -> bool {
        false
    }

    fn observe(&self, v: &[f64], q: u32) -> Vec<f64>;

    fn is_unsafe(&self, v: &[f64], q: u32) -> bool;

    fn initial_mode(&self, _v: &[f64]) -> u32 {
        0
    }

    fn mode_count(&self) -> u32 {
        1
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Dynamics {
    InvertedPendulum(InvertedPendulum),
    SpikingNeuron(SpikingNeuron),
    CoupledVanDerPol(CoupledVanDerPol),
    LaubLoomis(LaubLoomis),
    WaterTank(WaterTank),
    Linear(LinearSystem),
}

impl Dynamics {
    pub fn plant(&self) -> &dyn Plant {
        match self {
            Dynamics::InvertedPendulum(p) => p,
            Dynamics::SpikingNeuron(p) => p,
            Dynamics::CoupledVanDerPol(p) => p,
            Dynamics::LaubLoomis(p) => p,
            Dynamics::WaterTank(p) => p,
            Dynamics::Linear(p) => p,
        }
    }
}

/// A benchmark model with its observation, noise, safety and horizon settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HybridSystemSpec {
    pub name: String,
    pub dynamics: Dynamics,
    pub state_dim: usize,
    pub obs_dim: usize,
    /// Standard deviation of the additive Gaussian noise, per observed channel.
    pub noise_std: Vec<f64>,
    /// Axis-aligned box `(low, high)` per state dimension.
    pub init_domain: Vec<(f64, f64)>,
    pub past_horizon: usize,
    pub future_horizon: usize,
    pub dt: f64,
    /// RK4 steps per simulation step.
    pub substeps: usize,
}

/// An ordered run of states produced by repeated [`HybridSystemSpec::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<HybridState>,
    pub t0: f64,
    pub dt: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &HybridState {
        self.states.last().expect("trajectory has at least one state")
    }
}

impl HybridSystemSpec {
    pub fn plant(&self) -> &dyn Plant {
        self.dynamics.plant()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("{}: {m}", self.name)));
        if self.past_horizon < 1 || self.future_horizon < 1 {
            return bad("horizons must be at least 1");
        }
        if !(self.dt > 0.0) || self.substeps == 0 {
            return bad("dt must be positive and substeps nonzero");
        }
        if self.noise_std.len() != self.obs_dim || self.noise_std.iter().any(|s| !(*s >= 0.0)) {
            return bad("noise_std must have obs_dim nonnegative entries");
        }
        if self.init_domain.len() != self.state_dim || self.init_domain.iter().any(|(lo, hi)| !(lo <= hi)) {
            return bad("init_domain must be a nonempty box of state_dim intervals");
        }
        Ok(())
    }

    /// Length of the model input window, `H_p + 1`.
    pub fn window(&self) -> usize {
        self.past_horizon + 1
    }

    fn check_state(&self, s: &HybridState) -> Result<()> {
        if s.v.len() != self.state_dim {
            return Err(Error::Shape(format!(
                "{} expects {} state variables, got {}",
                self.name,
                self.state_dim,
                s.v.len()
            )));
        }
        if s.q >= self.plant().mode_count() {
            return Err(Error::InvalidArgument(format!(
                "mode {} out of range for {}",
                s.q, self.name
            )));
        }
        Ok(())
    }

    /// One discrete-time transition.
    pub fn step(&self, s: &HybridState) -> Result<HybridState> {
        self.check_state(s)?;
        let plant = self.plant();
        let a = plant.control(&s.v, s.q);
        let h = self.dt / self.substeps as f64;
        let mut v = s.v.clone();
        let mut rk = Rk4Scratch::new(v.len());
        for _ in 0..self.substeps {
            rk.step(|x, dx| plant.derivative(x, s.q, &a, dx), &mut v, h);
        }
        let q = plant.next_mode(&s.v, s.q);
        plant.reset(&mut v);
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::IntegrationDiverged { step: 0, state: v });
        }
        Ok(HybridState { v, q })
    }

    pub fn simulate(&self, s0: &HybridState, n_steps: usize) -> Result<Trajectory> {
        self.check_state(s0)?;
        let mut states = Vec::with_capacity(n_steps + 1);
        states.push(s0.clone());
        for i in 0..n_steps {
            let next = self.step(&states[i]).map_err(|e| match e {
                Error::IntegrationDiverged { state, .. } => Error::IntegrationDiverged { step: i + 1, state },
                other => other,
            })?;
            states.push(next);
        }
        Ok(Trajectory {
            states,
            t0: 0.0,
            dt: self.dt,
        })
    }

    /// Noise-free observation `mu(v, q)`.
    pub fn observe_mean(&self, s: &HybridState) -> Vec<f64> {
        self.plant().observe(&s.v, s.q)
    }

    /// Noisy observation `mu(v, q) + w`, `w ~ N(0, diag(noise_std^2))`.
    pub fn observe(&self, s: &HybridState, rng: &mut Rng) -> Vec<f64> {
        let mut y = self.observe_mean(s);
        for (yi, sd) in y.iter_mut().zip(&self.noise_std) {
            let z: f64 = rng.sample(StandardNormal);
            *yi += sd * z;
        }
        y
    }

    pub fn is_unsafe(&self, s: &HybridState) -> bool {
        self.plant().is_unsafe(&s.v, s.q)
    }

    /// Uniform draw over the initial box, with the model's initial mode.
    pub fn sample_initial(&self, rng: &mut Rng) -> HybridState {
        let v: Vec<f64> = self
            .init_domain
            .iter()
            .map(|&(lo, hi)| lo + (hi - lo) * rng.gen::<f64>())
            .collect();
        let q = self.plant().initial_mode(&v);
        HybridState { v, q }
    }

    /// Copy with every noise standard deviation multiplied by `factor`.
    pub fn with_noise_scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.noise_std.iter_mut().for_each(|s| *s *= factor);
        out
    }

    pub fn with_substeps(&self, substeps: usize) -> Self {
        let mut out = self.clone();
        out.substeps = substeps;
        out
    }
}

/// Classical fourth-order Runge-Kutta with reusable buffers.
pub(crate) struct Rk4Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Scratch {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    pub(crate) fn step<F>(&mut self, f: F, v: &mut [f64], h: f64)
    where
        F: Fn(&[f64], &mut [f64]),
    {
        let n = v.len();
        f(v, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = v[i] + 0.5 * h * self.k1[i];
        }
        f(&self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = v[i] + 0.5 * h * self.k2[i];
        }
        f(&self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = v[i] + h * self.k3[i];
        }
        f(&self.tmp, &mut self.k4);
        for i in 0..n {
            v[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn zero_steps_returns_initial_state() {
        for name in MODEL_NAMES {
            let spec = by_name(name).unwrap();
            let s0 = spec.sample_initial(&mut seeded(3));
            let tr = spec.simulate(&s0, 0).unwrap();
            assert_eq!(tr.states, vec![s0]);
        }
    }

    #[test]
    fn step_is_pure() {
        for name in MODEL_NAMES {
            let spec = by_name(name).unwrap();
            let mut rng = seeded(11);
            for _ in 0..20 {
                let s = spec.sample_initial(&mut rng);
                let a = spec.step(&s).unwrap();
                let b = spec.step(&s).unwrap();
                assert_eq!(a.q, b.q);
                for (x, y) in a.v.iter().zip(&b.v) {
                    assert_eq!(x.to_bits(), y.to_bits());
                }
            }
        }
    }

    #[test]
    fn zero_noise_observation_is_the_mean() {
        for name in MODEL_NAMES {
            let spec = by_name(name).unwrap().with_noise_scale(0.0);
            let mut rng = seeded(5);
            let s = spec.sample_initial(&mut rng);
            assert_eq!(spec.observe(&s, &mut rng), spec.observe_mean(&s));
        }
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let spec = by_name("ip").unwrap();
        let err = spec.step(&HybridState::new(vec![0.0; 3], 0)).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn divergence_reports_the_failing_step() {
        let text = "dim 1\ndt 1.0\npast_horizon 1\nfuture_horizon 1\nobserve 0\nnoise_std 0\nunsafe 0 <= 0\nA\n800\n";
        let spec = parse_linear_system("blowup", text).unwrap();
        let err = spec.simulate(&HybridState::new(vec![1.0], 0), 400).unwrap_err();
        match err {
            Error::IntegrationDiverged { step, .. } => assert!(step > 1 && step < 400),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn registry_models_validate() {
        for name in MODEL_NAMES {
            by_name(name).unwrap().validate().unwrap();
        }
    }
}
