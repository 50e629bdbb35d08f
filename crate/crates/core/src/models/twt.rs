use serde::{Deserialize, Serialize};

use super::Plant;

/// Three tanks in a row, each with an on/off pump. Tank `i` receives the
/// outflow of tank `i - 1` (nothing for the first tank):
///
/// `A_i v_i' = m_i [pump on] + a sqrt(2 g v_{i-1}) - b sqrt(2 g v_i)`.
///
/// The mode is a bitmask with bit `i` set when pump `i` is on. A pump is
/// switched on below `pump_threshold` and off at or above it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaterTank {
    pub area: [f64; 3],
    pub pump: [f64; 3],
    pub inflow: f64,
    pub outflow: f64,
    pub gravity: f64,
    pub pump_threshold: f64,
    /// Safe interval for every level.
    pub safe: (f64, f64),
}

impl Default for WaterTank {
    fn default() -> Self {
        Self {
            area: [1.0; 3],
            // the first pump cannot hold the level against the outflow
            pump: [0.4, 1.0, 1.0],
            inflow: 0.05,
            outflow: 0.05,
            gravity: 9.81,
            pump_threshold: 5.0,
            safe: (4.5, 5.5),
        }
    }
}

impl WaterTank {
    fn pump_law(&self, v: &[f64]) -> u32 {
        (0..3)
            .filter(|&i| v[i] < self.pump_threshold)
            .fold(0, |q, i| q | (1 << i))
    }
}

impl Plant for WaterTank {
    fn derivative(&self, v: &[f64], q: u32, _a: &[f64], dv: &mut [f64]) {
        let two_g = 2.0 * self.gravity;
        let mut upstream = 0.0;
        for i in 0..3 {
            let level = v[i].max(0.0);
            let on = if q & (1 << i) != 0 { self.pump[i] } else { 0.0 };
            dv[i] =
                (on + self.inflow * (two_g * upstream).sqrt() - self.outflow * (two_g * level).sqrt()) / self.area[i];
            upstream = level;
        }
    }

    fn next_mode(&self, v: &[f64], _q: u32) -> u32 {
        self.pump_law(v)
    }

    fn observe(&self, v: &[f64], _q: u32) -> Vec<f64> {
        v.to_vec()
    }

    fn is_unsafe(&self, v: &[f64], _q: u32) -> bool {
        v.iter().any(|&x| x < self.safe.0 || x > self.safe.1)
    }

    fn initial_mode(&self, v: &[f64]) -> u32 {
        self.pump_law(v)
    }

    fn mode_count(&self) -> u32 {
        8
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{by_name, HybridState};

    #[test]
    fn identity_observation() {
        let spec = by_name("twt").unwrap();
        let s = HybridState::new(vec![5.0, 5.0, 5.0], 0);
        assert_eq!(spec.observe_mean(&s), vec![5.0, 5.0, 5.0]);
    }

    #[test]
    fn pumps_follow_threshold() {
        let t = WaterTank::default();
        assert_eq!(t.initial_mode(&[4.9, 5.0, 5.1]), 0b001);
        assert_eq!(t.initial_mode(&[5.2, 4.0, 4.0]), 0b110);
    }

    #[test]
    fn unsafe_outside_interval() {
        let t = WaterTank::default();
        assert!(t.is_unsafe(&[4.0, 5.0, 5.0], 0));
        assert!(t.is_unsafe(&[5.0, 5.6, 5.0], 0));
        assert!(!t.is_unsafe(&[4.5, 5.5, 5.0], 0));
    }
}
