use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::Plant;

/// Inverted pendulum on a cart, state `(theta, omega)`, with the switching
/// energy-based control law.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvertedPendulum {
    /// Unsafe iff `|theta| >= unsafe_angle`.
    pub unsafe_angle: f64,
}

impl Default for InvertedPendulum {
    fn default() -> Self {
        Self { unsafe_angle: PI / 6.0 }
    }
}

impl InvertedPendulum {
    /// `E = 0.5 * omega + cos(theta) - 1`.
    pub fn energy(theta: f64, omega: f64) -> f64 {
        0.5 * omega + theta.cos() - 1.0
    }

    pub fn control_law(theta: f64, omega: f64) -> f64 {
        let e = Self::energy(theta, omega);
        if (-1.0..=1.0).contains(&e) {
            if omega.abs() + theta.abs() <= 1.85 {
                (2.0 * omega + theta + theta.sin()) / theta.cos()
            } else {
                0.0
            }
        } else if e < -1.0 {
            omega / (1.0 + omega.abs()) * theta.cos()
        } else {
            -omega / (1.0 + omega.abs()) * theta.cos()
        }
    }
}

impl Plant for InvertedPendulum {
    fn control(&self, v: &[f64], _q: u32) -> Vec<f64> {
        vec![Self::control_law(v[0], v[1])]
    }

    fn derivative(&self, v: &[f64], _q: u32, a: &[f64], dv: &mut [f64]) {
        let (theta, omega) = (v[0], v[1]);
        dv[0] = omega;
        dv[1] = theta.sin() - theta.cos() * a[0];
    }

    fn observe(&self, v: &[f64], _q: u32) -> Vec<f64> {
        vec![v[1] / 2.0 + v[0].cos() - 1.0]
    }

    fn is_unsafe(&self, v: &[f64], _q: u32) -> bool {
        v[0].abs() >= self.unsafe_angle
    }
}
