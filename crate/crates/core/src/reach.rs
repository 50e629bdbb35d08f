//! Simulation-based reachability oracle.
//!
//! A state is labelled positive when the unsafe set is hit by the state itself
//! or by any of the next `H_f` states of its (deterministic) trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{HybridState, HybridSystemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReachLabel {
    Safe = 0,
    Unsafe = 1,
}

impl ReachLabel {
    pub fn from_bool(unsafe_: bool) -> Self {
        if unsafe_ {
            ReachLabel::Unsafe
        } else {
            ReachLabel::Safe
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_u8(x: u8) -> Result<Self> {
        match x {
            0 => Ok(ReachLabel::Safe),
            1 => Ok(ReachLabel::Unsafe),
            other => Err(Error::InvalidArgument(format!("label byte {other}"))),
        }
    }
}

/// Label with the model's future horizon.
pub fn reach_label(spec: &HybridSystemSpec, s: &HybridState) -> Result<ReachLabel> {
    reach_label_within(spec, s, spec.future_horizon)
}

/// Label with an explicit horizon (in steps).
pub fn reach_label_within(spec: &HybridSystemSpec, s: &HybridState, horizon: usize) -> Result<ReachLabel> {
    if spec.is_unsafe(s) {
        return Ok(ReachLabel::Unsafe);
    }
    let mut cur = s.clone();
    for i in 0..horizon {
        cur = spec.step(&cur).map_err(|e| match e {
            Error::IntegrationDiverged { state, .. } => Error::IntegrationDiverged { step: i + 1, state },
            other => other,
        })?;
        if spec.is_unsafe(&cur) {
            return Ok(ReachLabel::Unsafe);
        }
    }
    Ok(ReachLabel::Safe)
}

/// Label of a window of `H_p + 1` states: the label of its last state.
pub fn label_window(spec: &HybridSystemSpec, states: &[HybridState]) -> Result<ReachLabel> {
    if states.len() != spec.window() {
        return Err(Error::Shape(format!(
            "window of {} states, expected {}",
            states.len(),
            spec.window()
        )));
    }
    reach_label(spec, states.last().expect("nonempty window"))
}
