use serde::{Deserialize, Serialize};

use super::Dataset;

/// Observed extent of one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    fn degenerate(&self) -> bool {
        !(self.max > self.min)
    }
}

/// Per-dimension affine map onto `[-1, 1]` for states and observations.
///
/// A dimension that never varied maps to 0 and unscales to its constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub states: Vec<Range>,
    pub obs: Vec<Range>,
}

fn fit_ranges(values: impl Iterator<Item = f32>, dim: usize) -> Vec<Range> {
    let mut ranges = vec![
        Range {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        };
        dim
    ];
    for (i, x) in values.enumerate() {
        let r = &mut ranges[i % dim];
        let x = f64::from(x);
        r.min = r.min.min(x);
        r.max = r.max.max(x);
    }
    for r in &mut ranges {
        if !r.min.is_finite() {
            *r = Range { min: 0.0, max: 0.0 };
        }
    }
    ranges
}

impl Scaler {
    pub fn fit(ds: &Dataset) -> Self {
        Self {
            states: fit_ranges(ds.samples.iter().flat_map(|s| s.states.iter().copied()), ds.state_dim),
            obs: fit_ranges(ds.samples.iter().flat_map(|s| s.obs.iter().copied()), ds.obs_dim),
        }
    }

    pub fn scale_value(&self, r: &Range, x: f64) -> f64 {
        if r.degenerate() {
            0.0
        } else {
            2.0 * (x - r.min) / (r.max - r.min) - 1.0
        }
    }

    pub fn unscale_value(&self, r: &Range, y: f64) -> f64 {
        if r.degenerate() {
            r.min
        } else {
            (y + 1.0) * 0.5 * (r.max - r.min) + r.min
        }
    }

    fn map(&self, ranges: &[Range], values: impl Iterator<Item = f64>, f: fn(&Self, &Range, f64) -> f64) -> Vec<f64> {
        values
            .enumerate()
            .map(|(i, x)| f(self, &ranges[i % ranges.len()], x))
            .collect()
    }

    /// Scales a time-major observation window.
    pub fn scale_obs(&self, obs: &[f32]) -> Vec<f64> {
        self.map(&self.obs, obs.iter().map(|&x| f64::from(x)), Self::scale_value)
    }

    /// Scales a time-major state window.
    pub fn scale_states(&self, states: &[f32]) -> Vec<f64> {
        self.map(&self.states, states.iter().map(|&x| f64::from(x)), Self::scale_value)
    }

    pub fn scale_states_f64(&self, states: &[f64]) -> Vec<f64> {
        self.map(&self.states, states.iter().copied(), Self::scale_value)
    }

    pub fn unscale_states(&self, scaled: &[f64]) -> Vec<f64> {
        self.map(&self.states, scaled.iter().copied(), Self::unscale_value)
    }

    pub fn unscale_obs(&self, scaled: &[f64]) -> Vec<f64> {
        self.map(&self.obs, scaled.iter().copied(), Self::unscale_value)
    }
}
