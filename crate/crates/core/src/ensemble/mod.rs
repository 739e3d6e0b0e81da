//! Three classical classifiers over the network's deep features, fused by
//! majority vote: a primal linear SVM, a one-hidden-layer MLP, and boosted
//! decision stumps. Each also yields a real-valued score so curves can be
//! drawn for the fused model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

mod adaboost;
mod mlp;
mod svm;

pub use adaboost::{AdaBoostModel, Stump, train_adaboost};
pub use mlp::{MlpClassifier, train_mlp};
pub use svm::{LinearSvm, train_svm};

/// Row-major feature rows with binary labels.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
    labels: Vec<u8>,
}

impl<F: Scalar> FeatureMatrix<F> {
    pub fn new(rows: usize, cols: usize, data: Vec<F>, labels: Vec<u8>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values cannot fill {rows}×{cols}",
                data.len()
            )));
        }
        if labels.len() != rows {
            return Err(Error::Dimension(format!(
                "{} labels for {rows} rows",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Data(format!("label {bad} outside {{0, 1}}")));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("features contain non-finite values".into()));
        }
        Ok(FeatureMatrix { rows, cols, data, labels })
    }

    /// Adopts network features of shape (n, d, 1, 1).
    pub fn from_tensor(features: &Tensor<F>, labels: &[u8]) -> Result<Self> {
        let s = features.shape();
        if s.h != 1 || s.w != 1 {
            return Err(Error::Dimension(format!(
                "feature tensor {s} still has spatial extents"
            )));
        }
        Self::new(s.n, s.c, features.data().to_vec(), labels.to_vec())
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn dim(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn subset(&self, indices: &[usize]) -> FeatureMatrix<F> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        FeatureMatrix { rows: indices.len(), cols: self.cols, data, labels }
    }

    fn check_both_classes(&self) -> Result<()> {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        if self.rows < 2 || ones == 0 || ones == self.rows {
            return Err(Error::Data(
                "training features must contain both classes".into(),
            ));
        }
        Ok(())
    }
}

/// A trained binary classifier exposing a real score per row; the label is
/// the thresholded score.
pub trait MarginClassifier {
    fn feature_dim(&self) -> usize;
    /// (score, label) per row.
    fn predict_margin<F: Scalar>(&self, features: &FeatureMatrix<F>) -> Result<Vec<(f64, u8)>>;
    /// Maps this classifier's score into [0, 1] for curve plotting.
    fn normalized_score(&self, score: f64) -> f64;
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension(format!(
            "classifier expects {expected} features, rows have {got}"
        )));
    }
    Ok(())
}

/// Per-sample 2-of-3 vote; three binary voters always have a strict majority.
pub fn majority_vote(svm: &[u8], mlp: &[u8], adaboost: &[u8]) -> Result<Vec<u8>> {
    if svm.len() != mlp.len() || svm.len() != adaboost.len() {
        return Err(Error::Dimension(format!(
            "vote lengths differ: {} / {} / {}",
            svm.len(),
            mlp.len(),
            adaboost.len()
        )));
    }
    Ok(svm
        .iter()
        .zip(mlp)
        .zip(adaboost)
        .map(|((&a, &b), &c)| ((a as u32 + b as u32 + c as u32) >= 2) as u8)
        .collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleModel {
    svm: LinearSvm,
    mlp: MlpClassifier,
    adaboost: AdaBoostModel,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsemblePrediction {
    /// Majority-vote label.
    pub label: u8,
    /// Mean of the three normalized scores, in [0, 1]; the curve score.
    pub score: f64,
    pub svm: (f64, u8),
    pub mlp: (f64, u8),
    pub adaboost: (f64, u8),
}

impl EnsembleModel {
    pub fn new(svm: LinearSvm, mlp: MlpClassifier, adaboost: AdaBoostModel) -> Result<Self> {
        if svm.feature_dim() != mlp.feature_dim() || svm.feature_dim() != adaboost.feature_dim() {
            return Err(Error::Dimension(format!(
                "classifiers trained on different widths: svm {}, mlp {}, boosted stumps {}",
                svm.feature_dim(),
                mlp.feature_dim(),
                adaboost.feature_dim()
            )));
        }
        Ok(EnsembleModel { svm, mlp, adaboost })
    }

    pub fn svm(&self) -> &LinearSvm {
        &self.svm
    }

    pub fn mlp(&self) -> &MlpClassifier {
        &self.mlp
    }

    pub fn adaboost(&self) -> &AdaBoostModel {
        &self.adaboost
    }

    pub fn feature_dim(&self) -> usize {
        self.svm.feature_dim()
    }
}

pub fn ensemble_predict<F: Scalar>(
    model: &EnsembleModel,
    features: &FeatureMatrix<F>,
) -> Result<Vec<EnsemblePrediction>> {
    let svm = model.svm.predict_margin(features)?;
    let mlp = model.mlp.predict_margin(features)?;
    let ada = model.adaboost.predict_margin(features)?;
    let votes = majority_vote(
        &svm.iter().map(|&(_, l)| l).collect::<Vec<_>>(),
        &mlp.iter().map(|&(_, l)| l).collect::<Vec<_>>(),
        &ada.iter().map(|&(_, l)| l).collect::<Vec<_>>(),
    )?;
    Ok((0..features.len())
        .map(|i| EnsemblePrediction {
            label: votes[i],
            score: (model.svm.normalized_score(svm[i].0)
                + model.mlp.normalized_score(mlp[i].0)
                + model.adaboost.normalized_score(ada[i].0))
                / 3.0,
            svm: svm[i],
            mlp: mlp[i],
            adaboost: ada[i],
        })
        .collect())
}

#[cfg(test)]
pub(crate) fn blob_features(n_per_class: usize, dim: usize, seed: u64) -> FeatureMatrix<f64> {
    use rand::Rng;
    // Two Gaussian clouds separated along a random direction.
    let mut rng = crate::rng::seeded(seed);
    let dir: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
    let mut data = Vec::with_capacity(2 * n_per_class * dim);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for class in 0..2u8 {
        let sign = if class == 0 { -1.0 } else { 1.0 };
        for _ in 0..n_per_class {
            for d in &dir {
                data.push(sign * 1.5 * d / norm + rng.random_range(-0.6..0.6));
            }
            labels.push(class);
        }
    }
    FeatureMatrix::new(2 * n_per_class, dim, data, labels).unwrap()
}
