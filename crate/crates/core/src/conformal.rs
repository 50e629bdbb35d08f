//! Inductive conformal prediction.
//!
//! A [`CalibrationSet`] holds the nonconformity scores of held-out examples.
//! New scores are ranked against it to obtain smoothed p-values, from which
//! label regions (classification) or balls around a prediction (regression)
//! follow, along with confidence and credibility.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum of class likelihoods.
const NORMALISATION_TOL: f64 = 1e-9;

/// Nonconformity of `label` given class likelihoods: one minus its likelihood.
pub fn ncf_classification(likelihoods: &[f64], label: usize) -> Result<f64> {
    let sum: f64 = likelihoods.iter().sum();
    let in_range = likelihoods.iter().all(|p| (0.0..=1.0).contains(p));
    if !in_range || (sum - 1.0).abs() > NORMALISATION_TOL || label >= likelihoods.len() {
        return Err(Error::InvalidLikelihoods(likelihoods.to_vec()));
    }
    Ok(1.0 - likelihoods[label])
}

/// Euclidean norm of the difference between two flattened sequences.
pub fn ncf_regression(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::Shape(format!(
            "prediction of {} values against a target of {}",
            predicted.len(),
            truth.len()
        )));
    }
    Ok(predicted
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Calibration nonconformity scores, sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSet {
    scores: Vec<f64>,
}

impl CalibrationSet {
    pub fn new(mut scores: Vec<f64>) -> Result<Self> {
        if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::Numerical(format!("non-finite calibration score {bad}")));
        }
        scores.sort_by(f64::total_cmp);
        Ok(Self { scores })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Smoothed p-value `(#{a > score} + theta * (#{a == score} + 1)) / (n + 1)`.
    pub fn p_value(&self, score: f64, theta: f64) -> f64 {
        let below = self.scores.partition_point(|&a| a < score);
        let not_above = self.scores.partition_point(|&a| a <= score);
        let greater = self.scores.len() - not_above;
        let equal = not_above - below;
        (greater as f64 + theta * (equal as f64 + 1.0)) / (self.scores.len() as f64 + 1.0)
    }

    /// The `floor(eps * (n + 1))`-th largest score, or `None` when that index
    /// is below one and no finite radius achieves the requested coverage.
    pub fn quantile(&self, eps: f64) -> Result<Option<f64>> {
        if self.scores.is_empty() {
            return Err(Error::InsufficientData("empty calibration set".into()));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidArgument(format!("significance {eps} outside (0, 1)")));
        }
        let n = self.scores.len();
        // The nudge keeps products such as 0.29 * 100 from flooring one short.
        let k = (eps * (n + 1) as f64 * (1.0 + 1e-12)).floor() as usize;
        if k < 1 {
            return Ok(None);
        }
        Ok(Some(self.scores[n - k.min(n)]))
    }
}

/// Subset of the binary label set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRegion {
    pub labels: [bool; 2],
}

impl LabelRegion {
    pub const EMPTY: Self = Self { labels: [false, false] };
    pub const FULL: Self = Self { labels: [true, true] };

    pub fn singleton(label: usize) -> Self {
        let mut labels = [false; 2];
        labels[label] = true;
        Self { labels }
    }

    pub fn contains(&self, label: usize) -> bool {
        self.labels[label]
    }

    pub fn len(&self) -> usize {
        self.labels.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_singleton(&self) -> bool {
        self.len() == 1
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.labels.iter().zip(&other.labels).all(|(a, b)| !a || *b)
    }
}

/// Labels whose p-value exceeds `eps`.
pub fn classify_region(p: [f64; 2], eps: f64) -> LabelRegion {
    LabelRegion {
        labels: [p[0] > eps, p[1] > eps],
    }
}

/// Ball of the regression nonconformity norm around a prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionRegion {
    pub center: Vec<f64>,
    /// `f64::INFINITY` when the region is unbounded.
    pub radius: f64,
}

impl RegressionRegion {
    pub fn unbounded(&self) -> bool {
        self.radius.is_infinite()
    }

    pub fn width(&self) -> f64 {
        2.0 * self.radius
    }

    /// Bounds of a one-dimensional region.
    pub fn interval(&self) -> Option<(f64, f64)> {
        match self.center[..] {
            [c] => Some((c - self.radius, c + self.radius)),
            _ => None,
        }
    }

    pub fn contains(&self, truth: &[f64]) -> Result<bool> {
        Ok(ncf_regression(&self.center, truth)? <= self.radius)
    }
}

pub fn regress_region(prediction: &[f64], calib: &CalibrationSet, eps: f64) -> Result<RegressionRegion> {
    let radius = calib.quantile(eps)?.unwrap_or(f64::INFINITY);
    Ok(RegressionRegion {
        center: prediction.to_vec(),
        radius,
    })
}

/// Confidence (one minus the smaller p-value) and credibility (the larger).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyPair {
    pub confidence: f64,
    pub credibility: f64,
}

pub fn confidence_credibility(p: [f64; 2]) -> UncertaintyPair {
    UncertaintyPair {
        confidence: 1.0 - p[0].min(p[1]),
        credibility: p[0].max(p[1]),
    }
}

/// Both p-values of a binary prediction with likelihoods `lik`.
pub fn class_p_values(calib: &CalibrationSet, lik: [f64; 2], theta: f64) -> Result<[f64; 2]> {
    Ok([
        calib.p_value(ncf_classification(&lik, 0)?, theta),
        calib.p_value(ncf_classification(&lik, 1)?, theta),
    ])
}

fn nonempty<T>(xs: &[T]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::InsufficientData("no regions to score".into()));
    }
    Ok(())
}

/// Fraction of regions containing their true label.
pub fn coverage(regions: &[LabelRegion], truths: &[usize]) -> Result<f64> {
    nonempty(regions)?;
    if regions.len() != truths.len() {
        return Err(Error::Shape("regions and truths differ in length".into()));
    }
    let hits = regions.iter().zip(truths).filter(|(r, &t)| r.contains(t)).count();
    Ok(hits as f64 / regions.len() as f64)
}

/// Fraction of singleton regions.
pub fn efficiency_classification(regions: &[LabelRegion]) -> Result<f64> {
    nonempty(regions)?;
    Ok(regions.iter().filter(|r| r.is_singleton()).count() as f64 / regions.len() as f64)
}

/// Fraction of regression regions containing the truth.
pub fn coverage_regression(regions: &[RegressionRegion], truths: &[Vec<f64>]) -> Result<f64> {
    nonempty(regions)?;
    if regions.len() != truths.len() {
        return Err(Error::Shape("regions and truths differ in length".into()));
    }
    let mut hits = 0;
    for (r, t) in regions.iter().zip(truths) {
        hits += usize::from(r.contains(t)?);
    }
    Ok(hits as f64 / regions.len() as f64)
}

/// Mean width of regression regions.
pub fn efficiency_regression(regions: &[RegressionRegion]) -> Result<f64> {
    nonempty(regions)?;
    Ok(regions.iter().map(|r| r.width()).sum::<f64>() / regions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_scores() {
        assert_eq!(ncf_classification(&[1.0, 0.0], 0).unwrap(), 0.0);
        assert_eq!(ncf_classification(&[0.3, 0.7], 0).unwrap(), 0.7);
        assert_eq!(ncf_classification(&[0.5, 0.5], 1).unwrap(), 0.5);
        assert!(matches!(
            ncf_classification(&[0.5, 0.6], 0),
            Err(Error::InvalidLikelihoods(_))
        ));
        assert!(ncf_classification(&[1.5, -0.5], 0).is_err());
    }

    #[test]
    fn regression_scores() {
        assert_eq!(ncf_regression(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(ncf_regression(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 5.0);
        assert!(ncf_regression(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn p_value_examples() {
        let c = CalibrationSet::new(vec![0.3, 0.1, 0.2]).unwrap();
        assert_eq!(c.p_value(0.25, 0.0), 0.25);
        assert_eq!(c.p_value(0.2, 1.0), 0.75);
        assert_eq!(c.p_value(9.0, 0.0), 0.0);
        assert_eq!(c.p_value(9.0, 1.0), 0.25);
        assert!(CalibrationSet::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn region_examples() {
        let p = [0.8, 0.1];
        assert_eq!(classify_region(p, 0.05), LabelRegion::FULL);
        assert_eq!(classify_region(p, 0.2), LabelRegion::singleton(0));
        assert_eq!(classify_region(p, 0.9), LabelRegion::EMPTY);
    }

    #[test]
    fn quantile_index_arithmetic() {
        let c = CalibrationSet::new((1..=19).map(f64::from).collect()).unwrap();
        assert_eq!(c.quantile(0.05).unwrap(), Some(19.0));
        assert_eq!(c.quantile(0.1).unwrap(), Some(18.0));
        assert_eq!(c.quantile(0.04).unwrap(), None);
        let r = regress_region(&[2.0], &CalibrationSet::new(vec![0.5; 19]).unwrap(), 0.05).unwrap();
        assert_eq!(r.interval(), Some((1.5, 2.5)));
        let open = regress_region(&[2.0], &c, 0.01).unwrap();
        assert!(open.unbounded());
        assert!(CalibrationSet::new(vec![]).unwrap().quantile(0.1).is_err());
    }

    #[test]
    fn uncertainty_examples() {
        let u = confidence_credibility([0.8, 0.1]);
        assert!((u.confidence - 0.9).abs() < 1e-15);
        assert_eq!(u.credibility, 0.8);
        let u = confidence_credibility([0.5, 0.5]);
        assert_eq!((u.confidence, u.credibility), (0.5, 0.5));
    }

    #[test]
    fn metric_extremes() {
        let full = vec![LabelRegion::FULL; 4];
        assert_eq!(coverage(&full, &[0, 1, 1, 0]).unwrap(), 1.0);
        assert_eq!(efficiency_classification(&full).unwrap(), 0.0);
        let exact: Vec<_> = [0, 1, 1].iter().map(|&l| LabelRegion::singleton(l)).collect();
        assert_eq!(coverage(&exact, &[0, 1, 1]).unwrap(), 1.0);
        assert_eq!(efficiency_classification(&exact).unwrap(), 1.0);
        assert!(coverage(&[], &[]).is_err());
    }
}
