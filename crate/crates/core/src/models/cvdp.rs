use serde::{Deserialize, Serialize};

use super::Plant;

/// Two coupled Van der Pol oscillators, state `(x1, y1, x2, y2)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoupledVanDerPol {
    /// Unsafe iff `y1 >= limit && y2 >= limit`.
    pub limit: f64,
}

impl Default for CoupledVanDerPol {
    fn default() -> Self {
        Self { limit: 2.75 }
    }
}

impl Plant for CoupledVanDerPol {
    fn derivative(&self, s: &[f64], _q: u32, _a: &[f64], ds: &mut [f64]) {
        ds[0] = s[1];
        ds[1] = (1.0 - s[0] * s[0]) * s[1] - 2.0 * s[0] + s[2];
        ds[2] = s[3];
        ds[3] = (1.0 - s[2] * s[2]) * s[3] - 2.0 * s[2] + s[0];
    }

    fn observe(&self, s: &[f64], _q: u32) -> Vec<f64> {
        vec![s[0], s[2]]
    }

    fn is_unsafe(&self, s: &[f64], _q: u32) -> bool {
        s[1] >= self.limit && s[3] >= self.limit
    }
}
