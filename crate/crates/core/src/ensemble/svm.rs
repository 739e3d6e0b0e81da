//! Primal linear SVM trained by stochastic subgradient descent with the
//! 1/(λt) step schedule, over per-feature standardized inputs.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, MarginClassifier, check_dim};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    weights: Vec<f64>,
    bias: f64,
    lambda: f64,
    /// Training-set standardization, applied to every input row.
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl LinearSvm {
    pub fn from_parts(
        weights: Vec<f64>,
        bias: f64,
        lambda: f64,
        mean: Vec<f64>,
        std: Vec<f64>,
    ) -> Result<Self> {
        if mean.len() != weights.len() || std.len() != weights.len() {
            return Err(Error::Dimension(format!(
                "standardization arrays ({}, {}) do not match weight width {}",
                mean.len(),
                std.len(),
                weights.len()
            )));
        }
        let finite = weights.iter().chain(&mean).chain(&std).all(|v| v.is_finite())
            && bias.is_finite()
            && lambda.is_finite();
        if !finite || std.iter().any(|&s| s <= 0.0) {
            return Err(Error::Data(
                "svm parameters must be finite with positive stds".into(),
            ));
        }
        Ok(LinearSvm { weights, bias, lambda, mean, std })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn standardization(&self) -> (&[f64], &[f64]) {
        (&self.mean, &self.std)
    }

    fn margin<F: Scalar>(&self, row: &[F]) -> f64 {
        let mut s = self.bias;
        for (j, &v) in row.iter().enumerate() {
            let x = (v.to_f64().unwrap_or(f64::NAN) - self.mean[j]) / self.std[j];
            s += self.weights[j] * x;
        }
        s
    }

    /// Regularized mean hinge loss: λ/2·‖w‖² + mean max(0, 1 − y·(w·x+b)).
    /// At w = 0, b = 0 this is exactly 1.
    pub fn objective<F: Scalar>(&self, features: &FeatureMatrix<F>) -> Result<f64> {
        check_dim(self.weights.len(), features.dim())?;
        if features.is_empty() {
            return Err(Error::Data("objective over an empty set".into()));
        }
        let reg = 0.5 * self.lambda * self.weights.iter().map(|w| w * w).sum::<f64>();
        let mut hinge = 0.0;
        for i in 0..features.len() {
            let y = if features.labels()[i] == 1 { 1.0 } else { -1.0 };
            hinge += (1.0 - y * self.margin(features.row(i))).max(0.0);
        }
        Ok(reg + hinge / features.len() as f64)
    }
}

impl MarginClassifier for LinearSvm {
    fn feature_dim(&self) -> usize {
        self.weights.len()
    }

    fn predict_margin<F: Scalar>(&self, features: &FeatureMatrix<F>) -> Result<Vec<(f64, u8)>> {
        check_dim(self.weights.len(), features.dim())?;
        Ok((0..features.len())
            .map(|i| {
                let s = self.margin(features.row(i));
                (s, (s > 0.0) as u8)
            })
            .collect())
    }

    fn normalized_score(&self, score: f64) -> f64 {
        1.0 / (1.0 + (-score).exp())
    }
}

/// Per-feature mean/std of the training rows; near-constant features fall
/// back to std 1.
fn standardization<F: Scalar>(features: &FeatureMatrix<F>) -> (Vec<f64>, Vec<f64>) {
    let d = features.dim();
    let n = features.len() as f64;
    let mut mean = vec![0.0; d];
    let mut sq = vec![0.0; d];
    for i in 0..features.len() {
        for (j, &v) in features.row(i).iter().enumerate() {
            let v = v.to_f64().unwrap_or(0.0);
            mean[j] += v;
            sq[j] += v * v;
        }
    }
    for j in 0..d {
        mean[j] /= n;
        let var = (sq[j] / n - mean[j] * mean[j]).max(0.0);
        sq[j] = if var.sqrt() < 1e-9 { 1.0 } else { var.sqrt() };
    }
    (mean, sq)
}

pub fn train_svm<F: Scalar>(
    features: &FeatureMatrix<F>,
    lambda: f64,
    epochs: usize,
    seed: u64,
) -> Result<LinearSvm> {
    features.check_both_classes()?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Argument(format!("lambda {lambda} must be positive")));
    }
    let d = features.dim();
    let (mean, std) = standardization(features);
    let standardized: Vec<Vec<f64>> = (0..features.len())
        .map(|i| {
            features.row(i)
                .iter()
                .enumerate()
                .map(|(j, &v)| (v.to_f64().unwrap_or(0.0) - mean[j]) / std[j])
                .collect()
        })
        .collect();
    let targets: Vec<f64> = features
        .labels()
        .iter()
        .map(|&l| if l == 1 { 1.0 } else { -1.0 })
        .collect();

    let mut weights = vec![0.0; d];
    let mut bias = 0.0;
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut rng = rng::stream(seed, rng::STREAM_TRAIN);
    let mut t = 0u64;
    // The optimum lies inside the ‖w‖ ≤ 1/√λ ball; projecting onto it each
    // step tames the huge early 1/(λt) learning rates.
    let cap = 1.0 / lambda.sqrt();
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let y = targets[i];
            let margin: f64 =
                bias + weights.iter().zip(&standardized[i]).map(|(w, x)| w * x).sum::<f64>();
            let shrink = 1.0 - eta * lambda;
            if y * margin < 1.0 {
                for (w, &x) in weights.iter_mut().zip(&standardized[i]) {
                    *w = shrink * *w + eta * y * x;
                }
                bias += eta * y;
            } else {
                for w in &mut weights {
                    *w *= shrink;
                }
            }
            let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
            if norm > cap {
                let scale = cap / norm;
                for w in &mut weights {
                    *w *= scale;
                }
            }
        }
    }
    if weights.iter().any(|w| !w.is_finite()) || !bias.is_finite() {
        return Err(Error::Divergence(
            "svm weights became non-finite during training".into(),
        ));
    }
    Ok(LinearSvm { weights, bias, lambda, mean, std })
}
