use serde::{Deserialize, Serialize};

use super::Plant;

/// Spiking neuron, state `(potential, recovery)`.
///
/// `potential' = 0.04 p^2 + 5 p + 140 - r + I`, `recovery' = a (b p - r)`;
/// when the potential reaches `threshold` it is reset to `c` and the recovery
/// is incremented by `d`. The potential is hidden; the recovery is observed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpikingNeuron {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub current: f64,
    pub threshold: f64,
    /// Unsafe iff `potential <= undershoot`.
    pub undershoot: f64,
}

impl Default for SpikingNeuron {
    fn default() -> Self {
        Self {
            a: 0.02,
            b: 0.2,
            c: -65.0,
            d: 8.0,
            current: 40.0,
            threshold: 30.0,
            undershoot: -68.5,
        }
    }
}

impl Plant for SpikingNeuron {
    fn derivative(&self, v: &[f64], _q: u32, _a: &[f64], dv: &mut [f64]) {
        let (p, r) = (v[0], v[1]);
        dv[0] = 0.04 * p * p + 5.0 * p + 140.0 - r + self.current;
        dv[1] = self.a * (self.b * p - r);
    }

    fn reset(&self, v: &mut [f64]) -> bool {
        if v[0] >= self.threshold {
            v[0] = self.c;
            v[1] += self.d;
            true
        } else {
            false
        }
    }

    fn observe(&self, v: &[f64], _q: u32) -> Vec<f64> {
        vec![v[1]]
    }

    fn is_unsafe(&self, v: &[f64], _q: u32) -> bool {
        v[0] <= self.undershoot
    }
}
