use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::friction::{braking_action_of_prediction, to_braking_action};

/// Binary confusion counts with slippery as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn from_predictions(predicted: &[bool], actual: &[bool]) -> Result<Self> {
        if predicted.len() != actual.len() {
            return Err(Error::invalid(format!(
                "{} predictions but {} labels",
                predicted.len(),
                actual.len()
            )));
        }
        let mut cm = Self::default();
        for (&p, &a) in predicted.iter().zip(actual) {
            match (p, a) {
                (true, true) => cm.tp += 1,
                (false, true) => cm.fn_ += 1,
                (true, false) => cm.fp += 1,
                (false, false) => cm.tn += 1,
            }
        }
        Ok(cm)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.tn + self.fp
    }

    /// Element-wise sum.
    pub fn merge(&self, other: &Self) -> Self {
        Self {
            tp: self.tp + other.tp,
            fn_: self.fn_ + other.fn_,
            fp: self.fp + other.fp,
            tn: self.tn + other.tn,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub sensitivity: f64,
    pub specificity: f64,
    pub g_mean: f64,
}

pub fn classification_metrics(cm: &ConfusionMatrix) -> Result<ClassificationMetrics> {
    if cm.positives() == 0 {
        return Err(Error::UndefinedMetric("no positive cases, sensitivity is undefined".into()));
    }
    if cm.negatives() == 0 {
        return Err(Error::UndefinedMetric("no negative cases, specificity is undefined".into()));
    }
    let sensitivity = cm.tp as f64 / cm.positives() as f64;
    let specificity = cm.tn as f64 / cm.negatives() as f64;
    Ok(ClassificationMetrics { sensitivity, specificity, g_mean: (sensitivity * specificity).sqrt() })
}

fn check_scores(scores: &[f64], labels: &[bool]) -> Result<(u64, u64)> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!("{} scores but {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let pos = labels.iter().filter(|&&l| l).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("ROC needs both classes".into()));
    }
    Ok((pos, neg))
}

/// Indices sorted by ascending score.
fn score_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    order
}

/// Area under the ROC curve: the probability that a random positive scores
/// above a random negative, with ties counting one half.
///
/// The count is kept in integers as `2·concordant + tied` over `2·P·N`, so
/// the result is a single correctly rounded division.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_scores(scores, labels)?;
    let order = score_order(scores);
    let mut twice: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let v = scores[order[i]];
        let mut j = i;
        let (mut p, mut n) = (0u128, 0u128);
        while j < order.len() && scores[order[j]] == v {
            if labels[order[j]] {
                p += 1;
            } else {
                n += 1;
            }
            j += 1;
        }
        twice += p * (2 * neg_below + n);
        neg_below += n;
        i = j;
    }
    Ok(twice as f64 / (2 * pos as u128 * neg as u128) as f64)
}

/// One operating point: rows scoring at or above `threshold` are called
/// positive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// The opening point's infinite threshold is written as JSON `null`.
    #[serde(deserialize_with = "null_as_infinity")]
    pub threshold: f64,
}

fn null_as_infinity<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

/// ROC curve swept over every distinct score, from (0, 0) at an infinite
/// threshold to (1, 1).
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>> {
    let (pos, neg) = check_scores(scores, labels)?;
    let mut order = score_order(scores);
    order.reverse();
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY }];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let v = scores[order[i]];
        while i < order.len() && scores[order[i]] == v {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint { fpr: fp as f64 / neg as f64, tpr: tp as f64 / pos as f64, threshold: v });
    }
    Ok(points)
}

/// Trapezoidal area under a curve from [`roc_curve`].
pub fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub rmse: f64,
    pub mae: f64,
    /// Mean absolute difference in braking-action category.
    pub ba_error: f64,
    /// Percentage of cases whose braking action is off by at most one.
    pub within_one_pct: f64,
}

/// Error measures for predicted friction coefficients. Predictions below
/// zero map to braking action 0; negative truths are rejected.
pub fn regression_metrics(preds: &[f64], truths: &[f64]) -> Result<RegressionMetrics> {
    if preds.len() != truths.len() {
        return Err(Error::invalid(format!("{} predictions but {} truths", preds.len(), truths.len())));
    }
    if preds.is_empty() {
        return Err(Error::invalid("no predictions"));
    }
    if preds.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("predictions must be finite"));
    }
    let n = preds.len() as f64;
    let (mut se, mut ae, mut ba, mut within) = (0.0, 0.0, 0u64, 0u64);
    for (&p, &t) in preds.iter().zip(truths) {
        let d = p - t;
        se += d * d;
        ae += d.abs();
        let gap = braking_action_of_prediction(p).level().abs_diff(to_braking_action(t)?.level());
        ba += u64::from(gap);
        within += u64::from(gap <= 1);
    }
    Ok(RegressionMetrics {
        rmse: (se / n).sqrt(),
        mae: ae / n,
        ba_error: ba as f64 / n,
        within_one_pct: 100.0 * within as f64 / n,
    })
}

/// Share of positive labels, the default decision threshold.
pub fn positive_rate(labels: &[bool]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::invalid("no labels"));
    }
    Ok(labels.iter().filter(|&&l| l).count() as f64 / labels.len() as f64)
}

/// Calls a case slippery when `p ≥ threshold`.
pub fn threshold_classify(probabilities: &[f64], threshold: f64) -> Result<Vec<bool>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(format!("threshold {threshold} outside (0, 1)")));
    }
    Ok(probabilities.iter().map(|&p| p >= threshold).collect())
}
