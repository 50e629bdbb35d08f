//! Unscented Kalman filter baseline for state reconstruction, and the
//! relative-error metric used to compare estimators.
//!
//! The process model is one simulation step of the hybrid system and the
//! measurement model is its noiseless observation map. Modes are not
//! estimated; each sigma point takes the mode the plant assigns to it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Range;
use crate::error::{Error, Result};
use crate::models::{HybridState, HybridSystemSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UkfConfig {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    /// Diagonal of the process-noise covariance.
    pub process_noise: Vec<f64>,
    /// Diagonal of the measurement-noise covariance.
    pub measurement_noise: Vec<f64>,
    pub initial_mean: Vec<f64>,
    /// Diagonal of the initial covariance.
    pub initial_cov: Vec<f64>,
}

impl UkfConfig {
    /// Standard sigma-point spread, small process noise, measurement noise
    /// from the spec, and a prior matching a uniform law over `state_ranges`.
    pub fn for_spec(spec: &HybridSystemSpec, state_ranges: &[Range]) -> Self {
        Self {
            alpha: 1e-3,
            beta: 2.0,
            kappa: 0.0,
            process_noise: vec![1e-4; spec.state_dim],
            measurement_noise: spec.noise_std.iter().map(|s| s * s).collect(),
            initial_mean: state_ranges.iter().map(|r| 0.5 * (r.min + r.max)).collect(),
            initial_cov: state_ranges
                .iter()
                .map(|r| ((r.max - r.min).powi(2) / 12.0).max(1e-6))
                .collect(),
        }
    }
}

struct Weights {
    mean: Vec<f64>,
    cov: Vec<f64>,
    spread: f64,
}

fn weights(n: usize, cfg: &UkfConfig) -> Weights {
    let nf = n as f64;
    let lambda = cfg.alpha * cfg.alpha * (nf + cfg.kappa) - nf;
    let spread = nf + lambda;
    let mut mean = vec![1.0 / (2.0 * spread); 2 * n + 1];
    let mut cov = mean.clone();
    mean[0] = lambda / spread;
    cov[0] = lambda / spread + (1.0 - cfg.alpha * cfg.alpha + cfg.beta);
    Weights { mean, cov, spread }
}

const JITTER_ATTEMPTS: usize = 6;

/// Lower Cholesky factor, adding growing diagonal jitter if needed.
fn robust_cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let scale = sym.diagonal().iter().map(|d| d.abs()).fold(0.0, f64::max).max(1e-12);
    let mut jitter = 0.0;
    for attempt in 0..JITTER_ATTEMPTS {
        let mut candidate = sym.clone();
        for i in 0..candidate.nrows() {
            candidate[(i, i)] += jitter;
        }
        if let Some(c) = candidate.cholesky() {
            return Ok(c.l());
        }
        jitter = scale * 1e-12 * 100f64.powi(attempt as i32);
    }
    Err(Error::FilterDiverged("covariance is not positive definite".into()))
}

fn sigma_points(x: &DVector<f64>, p: &DMatrix<f64>, spread: f64) -> Result<Vec<DVector<f64>>> {
    let l = robust_cholesky(&(p * spread))?;
    let n = x.len();
    let mut pts = Vec::with_capacity(2 * n + 1);
    pts.push(x.clone());
    for i in 0..n {
        pts.push(x + l.column(i));
    }
    for i in 0..n {
        pts.push(x - l.column(i));
    }
    Ok(pts)
}

fn weighted_mean(pts: &[DVector<f64>], w: &[f64]) -> DVector<f64> {
    let mut m = DVector::zeros(pts[0].len());
    for (p, &wi) in pts.iter().zip(w) {
        m += p * wi;
    }
    m
}

fn cross_cov(a: &[DVector<f64>], am: &DVector<f64>, b: &[DVector<f64>], bm: &DVector<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(am.len(), bm.len());
    for ((x, y), &wi) in a.iter().zip(b).zip(w) {
        c += (x - am) * (y - bm).transpose() * wi;
    }
    c
}

fn to_state(spec: &HybridSystemSpec, v: &DVector<f64>) -> HybridState {
    let v: Vec<f64> = v.iter().copied().collect();
    let q = spec.plant().initial_mode(&v);
    HybridState::new(v, q)
}

/// Filtered state estimates, one per observation.
pub fn ukf_estimate(spec: &HybridSystemSpec, obs: &[Vec<f64>], cfg: &UkfConfig) -> Result<Vec<Vec<f64>>> {
    let n = spec.state_dim;
    let m = spec.obs_dim;
    if cfg.initial_mean.len() != n || cfg.initial_cov.len() != n || cfg.process_noise.len() != n {
        return Err(Error::Shape(
            "filter configuration does not match the state dimension".into(),
        ));
    }
    if cfg.measurement_noise.len() != m {
        return Err(Error::Shape(
            "measurement noise does not match the observation dimension".into(),
        ));
    }
    if let Some(y) = obs.iter().find(|y| y.len() != m) {
        return Err(Error::Shape(format!("observation of {} values, expected {m}", y.len())));
    }
    let w = weights(n, cfg);
    let q = DMatrix::from_diagonal(&DVector::from_vec(cfg.process_noise.clone()));
    let r = DMatrix::from_diagonal(&DVector::from_vec(cfg.measurement_noise.clone()));
    let mut x = DVector::from_vec(cfg.initial_mean.clone());
    let mut p = DMatrix::from_diagonal(&DVector::from_vec(cfg.initial_cov.clone()));
    let mut out = Vec::with_capacity(obs.len());
    for (t, y) in obs.iter().enumerate() {
        let mut pts = sigma_points(&x, &p, w.spread)?;
        if t > 0 {
            for pt in &mut pts {
                let next = spec
                    .step(&to_state(spec, pt))
                    .map_err(|e| Error::FilterDiverged(format!("sigma point propagation: {e}")))?;
                *pt = DVector::from_vec(next.v);
            }
            x = weighted_mean(&pts, &w.mean);
            p = cross_cov(&pts, &x, &pts, &x, &w.cov) + &q;
        }
        let zs: Vec<DVector<f64>> = pts
            .iter()
            .map(|pt| DVector::from_vec(spec.observe_mean(&to_state(spec, pt))))
            .collect();
        let z = weighted_mean(&zs, &w.mean);
        let s = cross_cov(&zs, &z, &zs, &z, &w.cov) + &r;
        let pxz = cross_cov(&pts, &x, &zs, &z, &w.cov);
        let s_l = robust_cholesky(&s)?;
        // K = Pxz S^-1, from L L^T K^T = Pxz^T.
        let singular = || Error::FilterDiverged("innovation covariance is singular".into());
        let half = s_l.solve_lower_triangular(&pxz.transpose()).ok_or_else(singular)?;
        let gain = s_l
            .transpose()
            .solve_upper_triangular(&half)
            .ok_or_else(singular)?
            .transpose();
        let innovation = DVector::from_vec(y.clone()) - z;
        x += &gain * innovation;
        p -= &gain * &s * gain.transpose();
        p = (&p + p.transpose()) * 0.5;
        if x.iter().any(|v| !v.is_finite()) || p.iter().any(|v| !v.is_finite()) {
            return Err(Error::FilterDiverged(format!("non-finite estimate at step {t}")));
        }
        out.push(x.iter().copied().collect());
    }
    Ok(out)
}

/// Norm of the difference of two state sequences divided by the largest
/// per-dimension range. Dimensions with zero range are left out.
pub fn relative_error(truth: &[Vec<f64>], est: &[Vec<f64>], ranges: &[f64]) -> Result<f64> {
    if truth.len() != est.len()
        || truth
            .iter()
            .zip(est)
            .any(|(a, b)| a.len() != b.len() || a.len() != ranges.len())
    {
        return Err(Error::Shape("sequences and ranges are not aligned".into()));
    }
    let max_range = ranges.iter().copied().fold(0.0, f64::max);
    if !(max_range > 0.0) {
        return Err(Error::InvalidArgument("every state dimension has zero range".into()));
    }
    if ranges.iter().any(|&r| r <= 0.0) {
        log::warn!("relative error skips state dimensions with zero range");
    }
    let mut sq = 0.0;
    for (a, b) in truth.iter().zip(est) {
        for ((x, y), &r) in a.iter().zip(b).zip(ranges) {
            if r > 0.0 {
                sq += (x - y) * (x - y);
            }
        }
    }
    Ok(sq.sqrt() / max_range)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_examples() {
        let t = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        assert_eq!(relative_error(&t, &t, &[1.0, 2.0]).unwrap(), 0.0);
        let shifted: Vec<Vec<f64>> = t.iter().map(|s| vec![s[0] + 2.0, s[1]]).collect();
        // offset of one full range on dim 0 at two steps: sqrt(2 * 2^2) / 4
        let e = relative_error(&t, &shifted, &[2.0, 4.0]).unwrap();
        assert!((e - (8f64).sqrt() / 4.0).abs() < 1e-15);
        assert_eq!(relative_error(&t, &shifted, &[0.0, 4.0]).unwrap(), 0.0);
        assert!(relative_error(&t, &t[..1], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn weights_sum_to_one() {
        let cfg = UkfConfig {
            alpha: 1e-3,
            beta: 2.0,
            kappa: 0.0,
            process_noise: vec![],
            measurement_noise: vec![],
            initial_mean: vec![],
            initial_cov: vec![],
        };
        let w = weights(3, &cfg);
        assert!((w.mean.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
}
