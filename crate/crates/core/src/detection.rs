//! Uncertainty-based rejection of monitor predictions.
//!
//! Each calibration point gets a (confidence, credibility) pair computed
//! against the other cross-validation folds, plus a bit saying whether the
//! monitor got it wrong. A class-weighted linear SVC on the standardised
//! pairs then decides which runtime predictions to reject.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::conformal::{class_p_values, confidence_credibility, ncf_classification, CalibrationSet, UncertaintyPair};
use crate::error::{Error, Result};
use crate::nets::Prediction;
use crate::rng::{self, substream};

/// Smallest fold accepted by [`cv_uncertainty_labels`].
pub const MIN_FOLD: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyPoint {
    pub uncertainty: UncertaintyPair,
    /// The monitor misclassified this point.
    pub error: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvLabels {
    pub points: Vec<UncertaintyPoint>,
    /// Fold in which each point was held out.
    pub fold: Vec<usize>,
}

/// Labels every calibration point with the uncertainty the monitor's
/// predictions receive when the point's own fold is left out of calibration.
pub fn cv_uncertainty_labels(preds: &[Prediction], labels: &[usize], k_folds: usize, seed: u64) -> Result<CvLabels> {
    if k_folds < 2 {
        return Err(Error::InvalidArgument(format!("{k_folds} folds; need at least 2")));
    }
    if preds.len() != labels.len() {
        return Err(Error::Shape("predictions and labels differ in length".into()));
    }
    let n = preds.len();
    if n / k_folds < MIN_FOLD {
        return Err(Error::InsufficientData(format!(
            "{n} points give folds smaller than {MIN_FOLD}"
        )));
    }
    let mut rng = substream(seed, rng::stream::RULE);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % k_folds;
    }
    let scores = preds
        .iter()
        .zip(labels)
        .map(|(p, &l)| ncf_classification(&p.likelihoods, l))
        .collect::<Result<Vec<_>>>()?;
    let mut points = vec![None; n];
    for f in 0..k_folds {
        let calib = CalibrationSet::new((0..n).filter(|&i| fold[i] != f).map(|i| scores[i]).collect())?;
        for i in (0..n).filter(|&i| fold[i] == f) {
            let theta: f64 = rng.gen();
            let p = class_p_values(&calib, preds[i].likelihoods, theta)?;
            points[i] = Some(UncertaintyPoint {
                uncertainty: confidence_credibility(p),
                error: preds[i].label != labels[i],
            });
        }
    }
    Ok(CvLabels {
        points: points
            .into_iter()
            .map(|p| p.expect("every point is in a fold"))
            .collect(),
        fold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvcOpts {
    /// L2 regularisation strength.
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvcOpts {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            epochs: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degenerate {
    /// Every training point was a correct prediction.
    AcceptAll,
    /// Every training point was an error.
    RejectAll,
}

/// Linear decision `w . standardise(u) + b > 0  =>  reject`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectionRule {
    pub weights: [f64; 2],
    pub bias: f64,
    pub mean: [f64; 2],
    pub std: [f64; 2],
    /// Weights of the (correct, error) classes used in training.
    pub class_weights: [f64; 2],
    pub degenerate: Option<Degenerate>,
}

fn features(u: &UncertaintyPair) -> [f64; 2] {
    [u.confidence, u.credibility]
}

impl RejectionRule {
    pub const ACCEPT_ALL: Self = Self::constant(Degenerate::AcceptAll);
    pub const REJECT_ALL: Self = Self::constant(Degenerate::RejectAll);

    const fn constant(d: Degenerate) -> Self {
        Self {
            weights: [0.0; 2],
            bias: 0.0,
            mean: [0.0; 2],
            std: [1.0; 2],
            class_weights: [1.0; 2],
            degenerate: Some(d),
        }
    }

    fn standardise(&self, u: &UncertaintyPair) -> [f64; 2] {
        let x = features(u);
        [(x[0] - self.mean[0]) / self.std[0], (x[1] - self.mean[1]) / self.std[1]]
    }

    pub fn decision(&self, u: &UncertaintyPair) -> f64 {
        let x = self.standardise(u);
        self.weights[0] * x[0] + self.weights[1] * x[1] + self.bias
    }

    pub fn reject(&self, u: &UncertaintyPair) -> bool {
        match self.degenerate {
            Some(Degenerate::AcceptAll) => false,
            Some(Degenerate::RejectAll) => true,
            None => self.decision(u) > 0.0,
        }
    }
}

/// Trains the rejection rule by hinge-loss subgradient descent with
/// inverse-frequency class weights. Returns the averaged iterate.
pub fn train_rule(points: &[UncertaintyPoint], opts: &SvcOpts) -> Result<RejectionRule> {
    if points.is_empty() {
        return Err(Error::InsufficientData("no points to train a rejection rule".into()));
    }
    let n = points.len();
    let n_err = points.iter().filter(|p| p.error).count();
    if n_err == 0 || n_err == n {
        log::warn!("rejection rule trained on a single class; it is degenerate");
        return Ok(if n_err == 0 {
            RejectionRule::ACCEPT_ALL
        } else {
            RejectionRule::REJECT_ALL
        });
    }
    if !(opts.lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("regularisation {}", opts.lambda)));
    }
    let class_weights = [n as f64 / (2.0 * (n - n_err) as f64), n as f64 / (2.0 * n_err as f64)];

    let mut mean = [0.0; 2];
    for p in points {
        let x = features(&p.uncertainty);
        mean[0] += x[0] / n as f64;
        mean[1] += x[1] / n as f64;
    }
    let mut var = [0.0; 2];
    for p in points {
        let x = features(&p.uncertainty);
        var[0] += (x[0] - mean[0]).powi(2) / n as f64;
        var[1] += (x[1] - mean[1]).powi(2) / n as f64;
    }
    let std = var.map(|v| if v > 0.0 { v.sqrt() } else { 1.0 });
    let mut rule = RejectionRule {
        weights: [0.0; 2],
        bias: 0.0,
        mean,
        std,
        class_weights,
        degenerate: None,
    };
    let xs: Vec<[f64; 2]> = points.iter().map(|p| rule.standardise(&p.uncertainty)).collect();

    let mut rng = substream(opts.seed, rng::stream::RULE + 1);
    let mut order: Vec<usize> = (0..n).collect();
    let (mut w, mut b) = ([0.0f64; 2], 0.0f64);
    let (mut w_sum, mut b_sum) = ([0.0f64; 2], 0.0f64);
    let mut t = 0usize;
    for _ in 0..opts.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (opts.lambda * (t as f64 + 1.0 / opts.lambda));
            let y = if points[i].error { 1.0 } else { -1.0 };
            let c = class_weights[usize::from(points[i].error)];
            let margin = y * (w[0] * xs[i][0] + w[1] * xs[i][1] + b);
            for wj in &mut w {
                *wj *= 1.0 - eta * opts.lambda;
            }
            if margin < 1.0 {
                w[0] += eta * c * y * xs[i][0];
                w[1] += eta * c * y * xs[i][1];
                b += eta * c * y;
            }
            w_sum[0] += w[0];
            w_sum[1] += w[1];
            b_sum += b;
        }
    }
    if t > 0 {
        rule.weights = [w_sum[0] / t as f64, w_sum[1] / t as f64];
        rule.bias = b_sum / t as f64;
    }
    if !(rule.weights.iter().all(|v| v.is_finite()) && rule.bias.is_finite()) {
        return Err(Error::Numerical("rejection rule training diverged".into()));
    }
    Ok(rule)
}

/// Accuracy and rejection statistics of a monitor guarded by a rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub n: usize,
    pub accuracy: f64,
    pub errors: usize,
    pub false_negatives: usize,
    pub false_positives: usize,
    pub detected_false_negatives: usize,
    pub detected_false_positives: usize,
    pub rejected: usize,
    /// Detected errors over all errors; zero when there are no errors.
    pub detection_rate: f64,
    pub rejection_rate: f64,
    /// Error rate among accepted predictions.
    pub accepted_error_rate: f64,
}

impl DetectionReport {
    pub fn detected(&self) -> usize {
        self.detected_false_negatives + self.detected_false_positives
    }

    /// Detected over total false negatives, as `x/y`.
    pub fn fn_ratio(&self) -> String {
        format!("{}/{}", self.detected_false_negatives, self.false_negatives)
    }

    pub fn fp_ratio(&self) -> String {
        format!("{}/{}", self.detected_false_positives, self.false_positives)
    }
}

pub fn detection_metrics(predicted: &[usize], truth: &[usize], rejected: &[bool]) -> Result<DetectionReport> {
    let n = predicted.len();
    if n == 0 {
        return Err(Error::InsufficientData("empty test set".into()));
    }
    if truth.len() != n || rejected.len() != n {
        return Err(Error::Shape("detection inputs differ in length".into()));
    }
    let mut r = DetectionReport {
        n,
        accuracy: 0.0,
        errors: 0,
        false_negatives: 0,
        false_positives: 0,
        detected_false_negatives: 0,
        detected_false_positives: 0,
        rejected: 0,
        detection_rate: 0.0,
        rejection_rate: 0.0,
        accepted_error_rate: 0.0,
    };
    let mut accepted_errors = 0;
    for i in 0..n {
        let wrong = predicted[i] != truth[i];
        r.rejected += usize::from(rejected[i]);
        if !wrong {
            continue;
        }
        r.errors += 1;
        let missed_unsafe = truth[i] == 1;
        if missed_unsafe {
            r.false_negatives += 1;
            r.detected_false_negatives += usize::from(rejected[i]);
        } else {
            r.false_positives += 1;
            r.detected_false_positives += usize::from(rejected[i]);
        }
        accepted_errors += usize::from(!rejected[i]);
    }
    r.accuracy = (n - r.errors) as f64 / n as f64;
    r.rejection_rate = r.rejected as f64 / n as f64;
    if r.errors > 0 {
        r.detection_rate = r.detected() as f64 / r.errors as f64;
    }
    let accepted = n - r.rejected;
    if accepted > 0 {
        r.accepted_error_rate = accepted_errors as f64 / accepted as f64;
    }
    Ok(r)
}
