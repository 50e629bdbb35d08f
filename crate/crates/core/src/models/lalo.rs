use serde::{Deserialize, Serialize};

use super::Plant;

/// Seven-variable Laub-Loomis enzymatic network.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaubLoomis {
    /// Unsafe iff `s4 >= limit`.
    pub limit: f64,
}

impl Default for LaubLoomis {
    fn default() -> Self {
        Self { limit: 4.5 }
    }
}

impl Plant for LaubLoomis {
    fn derivative(&self, s: &[f64], _q: u32, _a: &[f64], ds: &mut [f64]) {
        ds[0] = 1.4 * s[2] - 0.9 * s[0];
        ds[1] = 2.5 * s[4] - 1.5 * s[1];
        ds[2] = 0.6 * s[6] - 0.8 * s[1] * s[2];
        ds[3] = 2.0 - 1.3 * s[2] * s[3];
        ds[4] = 0.7 * s[0] - s[3] * s[4];
        ds[5] = 0.3 * s[0] - 3.1 * s[5];
        ds[6] = 1.8 * s[5] - 1.5 * s[1] * s[6];
    }

    fn observe(&self, s: &[f64], _q: u32) -> Vec<f64> {
        vec![s[0], s[1], s[2], s[4], s[5], s[6]]
    }

    fn is_unsafe(&self, s: &[f64], _q: u32) -> bool {
        s[3] >= self.limit
    }
}
