//! One-hidden-layer softmax MLP trained with SGD on the shared tensor
//! primitives; scores are class-1 probabilities.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, MarginClassifier, check_dim};
use crate::error::{Error, Result};
use crate::rng::{self, ChaCha8Rng};
use crate::scalar::Scalar;
use crate::tensor::{ParamStore, SgdMomentum, Shape, Tape, Tensor};

const MLP_BATCH: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpClassifier {
    dim: usize,
    hidden: usize,
    /// (dim × hidden), row-major by input feature.
    hidden_weight: Vec<f64>,
    hidden_bias: Vec<f64>,
    /// (hidden × 2), row-major by hidden unit.
    output_weight: Vec<f64>,
    output_bias: Vec<f64>,
}

impl MlpClassifier {
    pub fn from_parts(
        dim: usize,
        hidden: usize,
        hidden_weight: Vec<f64>,
        hidden_bias: Vec<f64>,
        output_weight: Vec<f64>,
        output_bias: Vec<f64>,
    ) -> Result<Self> {
        let lens_ok = hidden_weight.len() == dim * hidden
            && hidden_bias.len() == hidden
            && output_weight.len() == hidden * 2
            && output_bias.len() == 2;
        if !lens_ok {
            return Err(Error::Dimension(
                "mlp arrays do not match the declared widths".into(),
            ));
        }
        let finite = hidden_weight
            .iter()
            .chain(&hidden_bias)
            .chain(&output_weight)
            .chain(&output_bias)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Data("mlp parameters must be finite".into()));
        }
        Ok(MlpClassifier { dim, hidden, hidden_weight, hidden_bias, output_weight, output_bias })
    }

    pub fn hidden_width(&self) -> usize {
        self.hidden
    }

    pub fn parts(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        (&self.hidden_weight, &self.hidden_bias, &self.output_weight, &self.output_bias)
    }

    /// Class-1 probability per row.
    fn prob_one<F: Scalar>(&self, row: &[F]) -> f64 {
        let mut logits = [self.output_bias[0], self.output_bias[1]];
        for h in 0..self.hidden {
            let mut a = self.hidden_bias[h];
            for (j, &v) in row.iter().enumerate() {
                a += self.hidden_weight[j * self.hidden + h] * v.to_f64().unwrap_or(f64::NAN);
            }
            let a = a.max(0.0);
            logits[0] += self.output_weight[h * 2] * a;
            logits[1] += self.output_weight[h * 2 + 1] * a;
        }
        let max = logits[0].max(logits[1]);
        let e0 = (logits[0] - max).exp();
        let e1 = (logits[1] - max).exp();
        e1 / (e0 + e1)
    }
}

impl MarginClassifier for MlpClassifier {
    fn feature_dim(&self) -> usize {
        self.dim
    }

    fn predict_margin<F: Scalar>(&self, features: &FeatureMatrix<F>) -> Result<Vec<(f64, u8)>> {
        check_dim(self.dim, features.dim())?;
        Ok((0..features.len())
            .map(|i| {
                let p = self.prob_one(features.row(i));
                (p, (p > 0.5) as u8)
            })
            .collect())
    }

    fn normalized_score(&self, score: f64) -> f64 {
        score
    }
}

fn he_init(shape: Shape, fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("finite std");
    let data = (0..shape.len()).map(|_| normal.sample(rng)).collect();
    Tensor::from_vec(shape, data).expect("length matches shape")
}

pub fn train_mlp<F: Scalar>(
    features: &FeatureMatrix<F>,
    hidden: usize,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<MlpClassifier> {
    features.check_both_classes()?;
    if hidden == 0 {
        return Err(Error::Argument("hidden width must be positive".into()));
    }
    if !(learning_rate > 0.0) || !learning_rate.is_finite() {
        return Err(Error::Argument(format!(
            "learning rate {learning_rate} must be positive"
        )));
    }
    let d = features.dim();
    let mut init_rng = rng::stream(seed, rng::STREAM_INIT);
    let mut params = ParamStore::new();
    let w1 = params.add("hidden.weight", he_init(Shape::new(d, hidden, 1, 1), d, &mut init_rng));
    let b1 = params.add("hidden.bias", Tensor::zeros(Shape::new(1, hidden, 1, 1)));
    let w2 = params.add("output.weight", he_init(Shape::new(hidden, 2, 1, 1), hidden, &mut init_rng));
    let b2 = params.add("output.bias", Tensor::zeros(Shape::new(1, 2, 1, 1)));

    let rows: Vec<Vec<f64>> = (0..features.len())
        .map(|i| features.row(i).iter().map(|v| v.to_f64().unwrap_or(0.0)).collect())
        .collect();
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut rng = rng::stream(seed, rng::STREAM_TRAIN);
    let mut optimizer = SgdMomentum::new(learning_rate, 0.0)?;

    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(MLP_BATCH) {
            let mut data = Vec::with_capacity(chunk.len() * d);
            let mut targets = Vec::with_capacity(chunk.len());
            for &i in chunk {
                data.extend_from_slice(&rows[i]);
                targets.push(features.labels()[i] as usize);
            }
            let batch = Tensor::from_vec(Shape::new(chunk.len(), d, 1, 1), data)?;
            let mut tape = Tape::new();
            let x = tape.leaf(batch);
            let h = tape.dense(&params, x, w1, b1)?;
            let h = tape.relu(h);
            let logits = tape.dense(&params, h, w2, b2)?;
            let (_, loss, _) = tape.softmax_crossentropy(logits, &targets)?;
            if !loss.is_finite() {
                return Err(Error::Divergence(format!(
                    "mlp loss became non-finite at epoch {epoch}"
                )));
            }
            tape.backward(&mut params)?;
            optimizer.step(&mut params);
        }
    }

    MlpClassifier::from_parts(
        d,
        hidden,
        params.value(w1).data().to_vec(),
        params.value(b1).data().to_vec(),
        params.value(w2).data().to_vec(),
        params.value(b2).data().to_vec(),
    )
}
