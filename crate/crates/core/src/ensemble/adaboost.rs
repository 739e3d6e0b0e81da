//! Boosted depth-1 decision stumps (discrete two-class boosting): each round
//! picks the weighted-error-minimizing axis stump, weighs it by
//! α = ½ ln((1−ε)/ε), and re-weights the samples multiplicatively.

use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, MarginClassifier, check_dim};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// ε is clamped into [EPS_FLOOR, 1 − EPS_FLOOR] before computing α.
const EPS_FLOOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    /// +1: predict class 1 above the threshold; −1: below.
    pub polarity: i8,
}

impl Stump {
    /// Vote in {−1, +1}.
    fn vote(&self, x: f64) -> f64 {
        let above = x > self.threshold;
        if above == (self.polarity > 0) { 1.0 } else { -1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostModel {
    dim: usize,
    stumps: Vec<Stump>,
    alphas: Vec<f64>,
    /// Weighted error of the stump chosen each round (pre-clamp).
    round_errors: Vec<f64>,
}

impl AdaBoostModel {
    pub fn from_parts(
        dim: usize,
        stumps: Vec<Stump>,
        alphas: Vec<f64>,
        round_errors: Vec<f64>,
    ) -> Result<Self> {
        if stumps.len() != alphas.len() || stumps.len() != round_errors.len() {
            return Err(Error::Dimension(format!(
                "{} stumps, {} weights, {} errors",
                stumps.len(),
                alphas.len(),
                round_errors.len()
            )));
        }
        if stumps.is_empty() {
            return Err(Error::Data("a boosted model needs at least one stump".into()));
        }
        if let Some(s) = stumps.iter().find(|s| s.feature >= dim) {
            return Err(Error::Dimension(format!(
                "stump feature index {} outside width {dim}",
                s.feature
            )));
        }
        if alphas.iter().any(|a| !a.is_finite() || *a <= 0.0) {
            return Err(Error::Data("stump weights must be finite and positive".into()));
        }
        Ok(AdaBoostModel { dim, stumps, alphas, round_errors })
    }

    pub fn rounds(&self) -> usize {
        self.stumps.len()
    }

    pub fn stumps(&self) -> &[Stump] {
        &self.stumps
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn round_errors(&self) -> &[f64] {
        &self.round_errors
    }
}

impl MarginClassifier for AdaBoostModel {
    fn feature_dim(&self) -> usize {
        self.dim
    }

    /// Score = Σ α·vote / Σ α ∈ [−1, 1].
    fn predict_margin<F: Scalar>(&self, features: &FeatureMatrix<F>) -> Result<Vec<(f64, u8)>> {
        check_dim(self.dim, features.dim())?;
        let total: f64 = self.alphas.iter().sum();
        Ok((0..features.len())
            .map(|i| {
                let row = features.row(i);
                let s: f64 = self
                    .stumps
                    .iter()
                    .zip(&self.alphas)
                    .map(|(stump, a)| {
                        a * stump.vote(row[stump.feature].to_f64().unwrap_or(f64::NAN))
                    })
                    .sum::<f64>()
                    / total;
                (s, (s > 0.0) as u8)
            })
            .collect())
    }

    fn normalized_score(&self, score: f64) -> f64 {
        (score + 1.0) / 2.0
    }
}

/// The weighted-error minimizer over all (feature, midpoint threshold,
/// polarity) stumps. Ties keep the first candidate in scan order: feature
/// ascending, threshold ascending, polarity +1 before −1.
fn best_stump<F: Scalar>(features: &FeatureMatrix<F>, weights: &[f64]) -> Option<(Stump, f64)> {
    let n = features.len();
    let mut best: Option<(Stump, f64)> = None;
    let mut order: Vec<usize> = (0..n).collect();
    for j in 0..features.dim() {
        let column: Vec<f64> = (0..n)
            .map(|i| features.row(i)[j].to_f64().unwrap_or(0.0))
            .collect();
        order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));
        // err_above(k) = weight misclassified by "class 1 strictly above the
        // cut after position k": positives at or below + negatives above.
        let mut positives_below = 0.0;
        let negatives_total: f64 = (0..n)
            .filter(|&i| features.labels()[i] == 0)
            .map(|i| weights[i])
            .sum();
        let mut negatives_below = 0.0;
        for k in 1..n {
            let i = order[k - 1];
            if features.labels()[i] == 1 {
                positives_below += weights[i];
            } else {
                negatives_below += weights[i];
            }
            if column[order[k - 1]] == column[order[k]] {
                continue;
            }
            let threshold = 0.5 * (column[order[k - 1]] + column[order[k]]);
            let err_above = positives_below + (negatives_total - negatives_below);
            for (err, polarity) in [(err_above, 1i8), (1.0 - err_above, -1i8)] {
                let candidate = Stump { feature: j, threshold, polarity };
                if best.as_ref().is_none_or(|(_, e)| err < *e) {
                    best = Some((candidate, err));
                }
            }
        }
    }
    best
}

pub fn train_adaboost<F: Scalar>(features: &FeatureMatrix<F>, rounds: usize) -> Result<AdaBoostModel> {
    features.check_both_classes()?;
    if rounds == 0 {
        return Err(Error::Argument("round budget must be positive".into()));
    }
    let n = features.len();
    let targets: Vec<f64> = features
        .labels()
        .iter()
        .map(|&l| if l == 1 { 1.0 } else { -1.0 })
        .collect();
    let mut weights = vec![1.0 / n as f64; n];
    let mut stumps = Vec::new();
    let mut alphas = Vec::new();
    let mut round_errors = Vec::new();

    for _ in 0..rounds {
        let Some((stump, eps)) = best_stump(features, &weights) else {
            break; // every feature constant: no candidate cuts
        };
        if eps >= 0.5 {
            break; // nothing better than chance on the current weighting
        }
        let clamped = eps.clamp(EPS_FLOOR, 1.0 - EPS_FLOOR);
        let alpha = 0.5 * ((1.0 - clamped) / clamped).ln();
        stumps.push(stump);
        alphas.push(alpha);
        round_errors.push(eps);
        if eps <= EPS_FLOOR {
            break; // perfect weak learner; further rounds cannot help
        }
        let mut total = 0.0;
        for i in 0..n {
            let vote = stump.vote(features.row(i)[stump.feature].to_f64().unwrap_or(0.0));
            weights[i] *= (-alpha * targets[i] * vote).exp();
            total += weights[i];
        }
        for w in &mut weights {
            *w /= total;
        }
        debug_assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    if stumps.is_empty() {
        return Err(Error::Data(
            "no stump beat chance on the first round; features carry no signal".into(),
        ));
    }
    AdaBoostModel::from_parts(features.dim(), stumps, alphas, round_errors)
}
