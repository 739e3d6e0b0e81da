//! Evaluation suite: confusion counts and the derived scores, ROC / PR
//! curves with AUC, and top-3 principal-component projections of feature
//! spaces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod pca;

pub use pca::{PcaProjection, pca_top3, principal_components};

/// Class 1 (parasitized) is the positive class throughout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub counts: ConfusionCounts,
    /// In percent; the other scores are unit fractions.
    pub accuracy: f64,
    pub precision: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub f_score: f64,
    /// True when any 0/0 score was defined as 0.
    pub degenerate: bool,
}

pub fn confusion(truth: &[u8], predicted: &[u8]) -> Result<ConfusionCounts> {
    if truth.len() != predicted.len() {
        return Err(Error::Dimension(format!(
            "{} truth labels vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.iter().chain(predicted).any(|&l| l > 1) {
        return Err(Error::Data("labels must lie in {0, 1}".into()));
    }
    let mut counts = ConfusionCounts {
        true_positive: 0,
        false_positive: 0,
        true_negative: 0,
        false_negative: 0,
    };
    for (&y, &p) in truth.iter().zip(predicted) {
        match (y, p) {
            (1, 1) => counts.true_positive += 1,
            (0, 1) => counts.false_positive += 1,
            (0, 0) => counts.true_negative += 1,
            _ => counts.false_negative += 1,
        }
    }
    Ok(counts)
}

pub fn report(counts: ConfusionCounts) -> Result<MetricsReport> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::Argument("empty confusion counts".into()));
    }
    let mut degenerate = false;
    let mut fraction = |num: usize, den: usize| -> f64 {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let accuracy = 100.0 * (counts.true_positive + counts.true_negative) as f64 / total as f64;
    let precision = fraction(counts.true_positive, counts.true_positive + counts.false_positive);
    let sensitivity = fraction(counts.true_positive, counts.true_positive + counts.false_negative);
    let specificity = fraction(counts.true_negative, counts.true_negative + counts.false_positive);
    let f_score = if precision + sensitivity == 0.0 {
        degenerate = true;
        0.0
    } else {
        2.0 * sensitivity * precision / (sensitivity + precision)
    };
    Ok(MetricsReport { counts, accuracy, precision, sensitivity, specificity, f_score, degenerate })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveKind {
    /// Points are (false-positive rate, true-positive rate).
    Roc,
    /// Points are (recall, precision).
    Pr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveData {
    pub kind: CurveKind,
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

fn check_curve_inputs(scores: &[f64], truth: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} scores vs {} labels",
            scores.len(),
            truth.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Data("scores contain non-finite values".into()));
    }
    if truth.iter().any(|&l| l > 1) {
        return Err(Error::Data("labels must lie in {0, 1}".into()));
    }
    let positives = truth.iter().filter(|&&l| l == 1).count();
    Ok((positives, truth.len() - positives))
}

/// Indices sorted by score descending, grouped at equal scores.
fn score_groups(scores: &[f64], truth: &[u8]) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut tp = 0;
        let mut fp = 0;
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if truth[order[j]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        groups.push((tp, fp));
        i = j;
    }
    groups
}

/// Threshold sweep over descending scores with ties grouped; the trapezoid
/// AUC equals the Mann–Whitney concordance probability (ties credited ½).
pub fn roc_curve(scores: &[f64], truth: &[u8]) -> Result<CurveData> {
    let (positives, negatives) = check_curve_inputs(scores, truth)?;
    if positives == 0 || negatives == 0 {
        return Err(Error::Data("a ROC curve needs both classes".into()));
    }
    let mut points = vec![(0.0, 0.0)];
    let mut tp = 0;
    let mut fp = 0;
    let mut auc = 0.0;
    for (dtp, dfp) in score_groups(scores, truth) {
        let prev = (fp as f64 / negatives as f64, tp as f64 / positives as f64);
        tp += dtp;
        fp += dfp;
        let next = (fp as f64 / negatives as f64, tp as f64 / positives as f64);
        auc += (next.0 - prev.0) * (next.1 + prev.1) / 2.0;
        points.push(next);
    }
    Ok(CurveData { kind: CurveKind::Roc, points, auc })
}

/// Precision-recall sweep, ties grouped. The curve starts at the cumulative
/// point of the first score group containing a positive; the area under that
/// anchor (recall × precision) counts as a rectangle, the rest by trapezoid
/// over recall.
pub fn pr_curve(scores: &[f64], truth: &[u8]) -> Result<CurveData> {
    let (positives, _) = check_curve_inputs(scores, truth)?;
    if positives == 0 {
        return Err(Error::Data("a PR curve needs positive samples".into()));
    }
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut tp = 0;
    let mut fp = 0;
    let mut auc = 0.0;
    for (dtp, dfp) in score_groups(scores, truth) {
        tp += dtp;
        fp += dfp;
        if tp == 0 {
            continue; // pure-negative prefix, before the curve's anchor
        }
        let recall = tp as f64 / positives as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        match points.last() {
            None => auc += recall * precision,
            Some(&(r, p)) => auc += (recall - r) * (precision + p) / 2.0,
        }
        points.push((recall, precision));
    }
    Ok(CurveData { kind: CurveKind::Pr, points, auc })
}
