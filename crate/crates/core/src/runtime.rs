//! A trained monitor together with its conformal calibration and rejection
//! rule, and its evaluation on labelled data.

use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::conformal::{
    class_p_values, classify_region, confidence_credibility, coverage, efficiency_classification, ncf_classification,
    ncf_regression, regress_region, CalibrationSet, LabelRegion, UncertaintyPair,
};
use crate::detection::{cv_uncertainty_labels, detection_metrics, train_rule, DetectionReport, RejectionRule, SvcOpts};
use crate::error::{Error, Result};
use crate::nets::{Examples, MonitorModel, Prediction};
use crate::rng::{self, substream};
use crate::store::{self, Array};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOpts {
    pub k_folds: usize,
    pub svc: SvcOpts,
    pub seed: u64,
}

impl Default for CalibrationOpts {
    fn default() -> Self {
        Self {
            k_folds: 5,
            svc: SvcOpts::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedMonitor {
    pub monitor: MonitorModel,
    /// Classification nonconformity scores of the calibration set.
    pub class_calib: CalibrationSet,
    /// Reconstruction nonconformity scores (two-step monitors only).
    pub state_calib: Option<CalibrationSet>,
    pub rule: RejectionRule,
}

/// Per-point outcome of a monitored prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub label: usize,
    pub truth: usize,
    pub likelihoods: [f64; 2],
    pub theta: f64,
    pub p_values: [f64; 2],
    pub uncertainty: UncertaintyPair,
    pub rejected: bool,
    /// Distance between reconstructed and true scaled states (two-step only).
    pub reconstruction_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsMetrics {
    pub eps: f64,
    pub coverage: f64,
    pub efficiency: f64,
    pub state_coverage: Option<f64>,
    /// Mean diameter of the state-reconstruction regions.
    pub state_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub detection: DetectionReport,
    pub per_eps: Vec<EpsMetrics>,
    pub points: Vec<PointResult>,
}

impl Evaluation {
    pub fn at(&self, eps: f64) -> Option<&EpsMetrics> {
        self.per_eps.iter().find(|m| m.eps == eps)
    }

    pub fn regions(&self, eps: f64) -> Vec<LabelRegion> {
        self.points.iter().map(|p| classify_region(p.p_values, eps)).collect()
    }
}

fn class_scores(preds: &[Prediction], labels: &[usize]) -> Result<Vec<f64>> {
    preds
        .iter()
        .zip(labels)
        .map(|(p, &l)| ncf_classification(&p.likelihoods, l))
        .collect()
}

impl CalibratedMonitor {
    /// Computes calibration scores on `calib` and trains the rejection rule
    /// from cross-validated uncertainty on the same set.
    pub fn calibrate(monitor: MonitorModel, calib: &Examples, opts: &CalibrationOpts) -> Result<Self> {
        if calib.is_empty() {
            return Err(Error::InsufficientData("empty calibration set".into()));
        }
        let preds = monitor.predict_all(calib)?;
        let class_calib = CalibrationSet::new(class_scores(&preds, &calib.labels)?)?;
        let state_calib = match monitor.estimator {
            Some(_) => {
                let scores = preds
                    .iter()
                    .zip(&calib.states)
                    .map(|(p, s)| ncf_regression(p.states.as_deref().expect("two-step prediction"), s))
                    .collect::<Result<Vec<_>>>()?;
                Some(CalibrationSet::new(scores)?)
            }
            None => None,
        };
        let cv = cv_uncertainty_labels(&preds, &calib.labels, opts.k_folds, opts.seed)?;
        let rule = train_rule(
            &cv.points,
            &SvcOpts {
                seed: opts.seed,
                ..opts.svc
            },
        )?;
        Ok(Self {
            monitor,
            class_calib,
            state_calib,
            rule,
        })
    }

    /// Monitors one scaled observation window.
    pub fn monitor_point(&self, obs: &[f64], theta: f64) -> Result<(Prediction, [f64; 2], UncertaintyPair, bool)> {
        let pred = self.monitor.predict(obs)?;
        let p = class_p_values(&self.class_calib, pred.likelihoods, theta)?;
        let u = confidence_credibility(p);
        let rejected = self.rule.reject(&u);
        Ok((pred, p, u, rejected))
    }

    /// Evaluates on `test`. One tie-breaking draw per test point comes from
    /// the stream of `seed`, so reruns are identical.
    pub fn evaluate(&self, test: &Examples, eps: &[f64], seed: u64) -> Result<Evaluation> {
        if test.is_empty() {
            return Err(Error::InsufficientData("empty test set".into()));
        }
        let mut rng = substream(seed, rng::stream::THETA);
        let mut points = Vec::with_capacity(test.len());
        for i in 0..test.len() {
            let theta: f64 = rng.gen();
            let (pred, p, u, rejected) = self.monitor_point(&test.obs[i], theta)?;
            let reconstruction_error = match &pred.states {
                Some(s) => Some(ncf_regression(s, &test.states[i])?),
                None => None,
            };
            points.push(PointResult {
                label: pred.label,
                truth: test.labels[i],
                likelihoods: pred.likelihoods,
                theta,
                p_values: p,
                uncertainty: u,
                rejected,
                reconstruction_error,
            });
        }
        let predicted: Vec<usize> = points.iter().map(|p| p.label).collect();
        let rejected: Vec<bool> = points.iter().map(|p| p.rejected).collect();
        let detection = detection_metrics(&predicted, &test.labels, &rejected)?;
        let mut per_eps = Vec::with_capacity(eps.len());
        for &e in eps {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::InvalidArgument(format!("significance {e} outside (0, 1)")));
            }
            let regions: Vec<LabelRegion> = points.iter().map(|p| classify_region(p.p_values, e)).collect();
            let (state_coverage, state_width) = match &self.state_calib {
                Some(calib) => {
                    // Every region is a ball of the same radius around its
                    // reconstruction, so membership reduces to the residual norm.
                    let radius = regress_region(&[0.0], calib, e)?.radius;
                    let inside = points
                        .iter()
                        .filter(|p| p.reconstruction_error.expect("two-step result") <= radius)
                        .count();
                    (Some(inside as f64 / points.len() as f64), Some(2.0 * radius))
                }
                None => (None, None),
            };
            per_eps.push(EpsMetrics {
                eps: e,
                coverage: coverage(&regions, &test.labels)?,
                efficiency: efficiency_classification(&regions)?,
                state_coverage,
                state_width,
            });
        }
        Ok(Evaluation {
            detection,
            per_eps,
            points,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        self.monitor.save(&dir.join("monitor"))?;
        let mut arrays = vec![("class_scores", Array::F64(self.class_calib.scores().to_vec()))];
        if let Some(s) = &self.state_calib {
            arrays.push(("state_scores", Array::F64(s.scores().to_vec())));
        }
        let meta = CalibrationMeta {
            rule: self.rule,
            has_state_scores: self.state_calib.is_some(),
        };
        store::write(&dir.join("calibration"), CALIBRATION_KIND, &meta, &arrays)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let monitor = MonitorModel::load(&dir.join("monitor"))?;
        let (meta, mut arrays): (CalibrationMeta, _) = store::read(&dir.join("calibration"), CALIBRATION_KIND)?;
        let class_calib = CalibrationSet::new(arrays.take_f64("class_scores")?)?;
        let state_calib = if meta.has_state_scores {
            Some(CalibrationSet::new(arrays.take_f64("state_scores")?)?)
        } else {
            None
        };
        Ok(Self {
            monitor,
            class_calib,
            state_calib,
            rule: meta.rule,
        })
    }
}

const CALIBRATION_KIND: &str = "calibration";

#[derive(Serialize, Deserialize)]
struct CalibrationMeta {
    rule: RejectionRule,
    has_state_scores: bool,
}
