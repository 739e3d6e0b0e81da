//! Training loop, donor pretraining, and auxiliary-branch transplant.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{self, ImageF};
use crate::rng::{self, ChaCha8Rng};
use crate::scalar::Scalar;
use crate::tensor::ops;
use crate::tensor::{SgdMomentum, Shape, Tape, Tensor};

use super::{BrstmConfig, BrstmModel, build_model};

/// Single-channel images with binary labels, all at the same extents.
#[derive(Clone, Debug)]
pub struct LabeledSet<F> {
    images: Vec<ImageF<F>>,
    labels: Vec<u8>,
}

impl<F: Scalar> LabeledSet<F> {
    pub fn new(images: Vec<ImageF<F>>, labels: Vec<u8>) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} images vs {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Data(format!("label {bad} outside {{0, 1}}")));
        }
        if let Some(first) = images.first() {
            let (h, w) = (first.height(), first.width());
            if images.iter().any(|i| i.height() != h || i.width() != w) {
                return Err(Error::Dimension("images have mixed extents".into()));
            }
        }
        Ok(LabeledSet { images, labels })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn image(&self, i: usize) -> &ImageF<F> {
        &self.images[i]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledSet<F> {
        LabeledSet {
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Raw (unaugmented, unstandardized) batch tensor for the given rows.
    pub fn batch(&self, indices: &[usize]) -> Tensor<F> {
        let (h, w) = (self.images[0].height(), self.images[0].width());
        let mut data = Vec::with_capacity(indices.len() * h * w);
        for &i in indices {
            data.extend_from_slice(self.images[i].data());
        }
        Tensor::from_vec(Shape::new(indices.len(), 1, h, w), data)
            .expect("uniform extents checked at construction")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Epoch whose parameters were kept (highest validation accuracy, ties to
    /// the latest); 0 when no epoch ran.
    pub best_epoch: usize,
    pub entries: Vec<TrainEpoch>,
    /// Wall clock, deliberately left out of the serialized form so logs from
    /// identical seeded runs stay byte-identical.
    #[serde(skip)]
    pub wall_seconds: f64,
}

/// SGD-with-momentum training: per-epoch shuffle and random augmentation,
/// cross-entropy loss, per-epoch validation; the best-validation parameters
/// are restored at the end. A zero learning rate degenerates to a pure
/// evaluation loop (no augmentation, no dropout, no updates).
pub fn train<F: Scalar>(
    model: &mut BrstmModel<F>,
    train_set: &LabeledSet<F>,
    val_set: &LabeledSet<F>,
) -> Result<TrainLog> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Data("training and validation splits must be non-empty".into()));
    }
    let cfg = model.config.clone();
    for (name, set) in [("training", train_set), ("validation", val_set)] {
        let img = set.image(0);
        if cfg.input_channels != 1
            || img.height() != cfg.input_height
            || img.width() != cfg.input_width
        {
            return Err(Error::Dimension(format!(
                "{name} images are {}×{}, model expects {}×{}×{}",
                img.height(),
                img.width(),
                cfg.input_height,
                cfg.input_width,
                cfg.input_channels
            )));
        }
    }

    let started = Instant::now();
    let (mean, std) = pixel_stats(train_set);
    model.set_input_stats(mean, std)?;

    let mut rng = rng::stream(cfg.seed, rng::STREAM_TRAIN);
    let eval_only = cfg.learning_rate == 0.0;
    let mut optimizer = if eval_only {
        None
    } else {
        Some(SgdMomentum::new(F::cast(cfg.learning_rate), F::cast(cfg.momentum))?)
    };

    let mut log = TrainLog {
        learning_rate: cfg.learning_rate,
        momentum: cfg.momentum,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        best_epoch: 0,
        entries: Vec::with_capacity(cfg.epochs),
        wall_seconds: 0.0,
    };
    let mut best_acc = f64::NEG_INFINITY;
    let mut best_params = model.params.snapshot();
    let mut indices: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.epochs {
        let (train_loss, train_accuracy) = if eval_only {
            eval_metrics(model, train_set, cfg.batch_size)?
        } else {
            let opt = optimizer.as_mut().expect("optimizer built for nonzero rate");
            indices.shuffle(&mut rng);
            let mut loss_sum = 0.0;
            let mut correct = 0usize;
            for (batch_no, chunk) in indices.chunks(cfg.batch_size).enumerate() {
                let (batch, targets) = augmented_batch(model, train_set, chunk, &mut rng);
                let mut tape = Tape::new();
                let x = tape.leaf(batch);
                let fwd = model.forward_on(&mut tape, x, Some(&mut rng))?;
                let (_, loss, probs) = tape.softmax_crossentropy(fwd.logits, &targets)?;
                let loss = loss.to_f64().unwrap_or(f64::NAN);
                if !loss.is_finite() {
                    return Err(Error::Divergence(format!(
                        "loss became non-finite at epoch {epoch}, batch {batch_no} \
                         (learning rate {}, momentum {})",
                        cfg.learning_rate, cfg.momentum
                    )));
                }
                loss_sum += loss * chunk.len() as f64;
                correct += correct_count(&probs, &targets);
                tape.backward(&mut model.params)?;
                opt.step(&mut model.params);
            }
            (loss_sum / train_set.len() as f64, correct as f64 / train_set.len() as f64)
        };

        let (_, val_accuracy) = eval_metrics(model, val_set, cfg.batch_size)?;
        log.entries.push(TrainEpoch {
            epoch,
            train_loss,
            train_accuracy,
            val_accuracy,
        });
        if val_accuracy >= best_acc {
            best_acc = val_accuracy;
            best_params = model.params.snapshot();
            log.best_epoch = epoch;
        }
    }

    model.params.restore(&best_params)?;
    log.wall_seconds = started.elapsed().as_secs_f64();
    Ok(log)
}

/// Mean loss and accuracy of the inference-mode network over a set.
fn eval_metrics<F: Scalar>(
    model: &BrstmModel<F>,
    set: &LabeledSet<F>,
    batch_size: usize,
) -> Result<(f64, f64)> {
    let indices: Vec<usize> = (0..set.len()).collect();
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for chunk in indices.chunks(batch_size) {
        let batch = set.batch(chunk);
        let targets: Vec<usize> = chunk.iter().map(|&i| set.label(i) as usize).collect();
        let logits = model.forward(&batch)?;
        let (loss, probs) = ops::softmax_crossentropy(&logits, &targets)?;
        loss_sum += loss.to_f64().unwrap_or(f64::NAN) * chunk.len() as f64;
        correct += correct_count(&probs, &targets);
    }
    Ok((loss_sum / set.len() as f64, correct as f64 / set.len() as f64))
}

fn correct_count<F: Scalar>(probs: &Tensor<F>, targets: &[usize]) -> usize {
    let s = probs.shape();
    let mut correct = 0;
    for (i, &t) in targets.iter().enumerate() {
        let row = &probs.data()[i * s.c..(i + 1) * s.c];
        let mut best = 0;
        for (c, &p) in row.iter().enumerate() {
            if p > row[best] {
                best = c;
            }
        }
        if best == t {
            correct += 1;
        }
    }
    correct
}

fn augmented_batch<F: Scalar>(
    model: &BrstmModel<F>,
    set: &LabeledSet<F>,
    chunk: &[usize],
    rng: &mut ChaCha8Rng,
) -> (Tensor<F>, Vec<usize>) {
    let (h, w) = (set.image(0).height(), set.image(0).width());
    let mut data = Vec::with_capacity(chunk.len() * h * w);
    let mut targets = Vec::with_capacity(chunk.len());
    for &i in chunk {
        let img = preprocess::random_augment(set.image(i), rng);
        data.extend_from_slice(img.data());
        targets.push(set.label(i) as usize);
    }
    let batch = Tensor::from_vec(Shape::new(chunk.len(), 1, h, w), data)
        .expect("augmentation preserves extents");
    (model.standardize(&batch), targets)
}

/// Scalar mean / standard deviation of every training pixel. A nearly
/// constant set falls back to std 1 so standardization stays defined.
fn pixel_stats<F: Scalar>(set: &LabeledSet<F>) -> (F, F) {
    let mut sum = 0.0f64;
    let mut sq = 0.0f64;
    let mut count = 0usize;
    for i in 0..set.len() {
        for &v in set.image(i).data() {
            let v = v.to_f64().unwrap_or(0.0);
            sum += v;
            sq += v * v;
            count += 1;
        }
    }
    let mean = sum / count as f64;
    let var = (sq / count as f64 - mean * mean).max(0.0);
    let std = if var.sqrt() < 1e-6 { 1.0 } else { var.sqrt() };
    (F::cast(mean), F::cast(std))
}

/// A same-topology network trained on an auxiliary task; its b/c branches are
/// the transplant source.
#[derive(Clone, Debug)]
pub struct DonorModel<F: Scalar> {
    network: BrstmModel<F>,
}

impl<F: Scalar> DonorModel<F> {
    pub fn network(&self) -> &BrstmModel<F> {
        &self.network
    }

    /// Wraps an externally trained network (persistence path).
    pub fn from_network(network: BrstmModel<F>) -> Self {
        DonorModel { network }
    }
}

/// Trains a donor on the auxiliary set for `config.donor_epochs` epochs. The
/// donor's seed is derived from `seed` so it never shares init or shuffle
/// streams with the main model.
pub fn pretrain_donor<F: Scalar>(
    aux: &LabeledSet<F>,
    config: &BrstmConfig,
    seed: u64,
) -> Result<(DonorModel<F>, TrainLog)> {
    if aux.len() < 2 {
        return Err(Error::Data(format!(
            "auxiliary dataset has {} samples, need at least 2",
            aux.len()
        )));
    }
    let mut donor_cfg = config.clone();
    donor_cfg.seed = seed ^ rng::STREAM_DONOR;
    donor_cfg.epochs = config.donor_epochs;
    let mut network = build_model(&donor_cfg, donor_cfg.seed)?;
    let (train_part, val_part) = donor_split(aux);
    let log = train(&mut network, &train_part, &val_part)?;
    Ok((DonorModel { network }, log))
}

/// Every fifth sample goes to validation; tiny sets fall back to holding out
/// the last sample.
fn donor_split<F: Scalar>(aux: &LabeledSet<F>) -> (LabeledSet<F>, LabeledSet<F>) {
    let val: Vec<usize> = (0..aux.len()).filter(|i| i % 5 == 4).collect();
    let (train, val) = if val.is_empty() {
        ((0..aux.len() - 1).collect::<Vec<_>>(), vec![aux.len() - 1])
    } else {
        ((0..aux.len()).filter(|i| i % 5 != 4).collect(), val)
    };
    (aux.subset(&train), aux.subset(&val))
}

/// Copies the donor's b/c branch parameters (conv + squeeze, all three
/// blocks) into `model` and freezes them; d/e branches stay trainable.
pub fn transplant_auxiliary<F: Scalar>(
    mut model: BrstmModel<F>,
    donor: &DonorModel<F>,
) -> Result<BrstmModel<F>> {
    for block in 1..=3 {
        for branch in ["b", "c"] {
            for part in ["conv", "squeeze"] {
                for leaf in ["kernel", "bias"] {
                    let name = format!("stm{block}.{branch}.{part}.{leaf}");
                    let donor_id = donor.network.params.by_name(&name).ok_or_else(|| {
                        Error::Transplant(format!("donor lacks parameter {name}"))
                    })?;
                    let value = donor.network.params.value(donor_id).clone();
                    let id = model
                        .params
                        .by_name(&name)
                        .expect("architecture registers every branch parameter");
                    if model.params.get(id).shape() != value.shape() {
                        return Err(Error::Transplant(format!(
                            "parameter {name}: donor shape {} does not fit {}",
                            value.shape(),
                            model.params.get(id).shape()
                        )));
                    }
                    model.params.set_value(id, value)?;
                    model.params.set_frozen(id, true);
                }
            }
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::super::tiny_config;
    use super::*;
    use crate::synthetic;

    fn toy_sets(per_class: usize, seed: u64) -> (LabeledSet<f32>, LabeledSet<f32>) {
        let all = synthetic::two_class_textures::<f32>(per_class, 8, 8, seed);
        let val: Vec<usize> = (0..all.len()).filter(|i| i % 4 == 3).collect();
        let train: Vec<usize> = (0..all.len()).filter(|i| i % 4 != 3).collect();
        (all.subset(&train), all.subset(&val))
    }

    #[test]
    fn labeled_set_validation() {
        let img = ImageF::<f32>::new(2, 2, vec![0.0; 4]).unwrap();
        assert!(LabeledSet::new(vec![img.clone()], vec![0, 1]).is_err());
        assert!(LabeledSet::new(vec![img.clone()], vec![2]).is_err());
        let other = ImageF::<f32>::new(2, 3, vec![0.0; 6]).unwrap();
        assert!(LabeledSet::new(vec![img.clone(), other], vec![0, 1]).is_err());
        assert!(LabeledSet::new(vec![img], vec![1]).is_ok());
    }

    #[test]
    fn empty_split_is_a_data_error() {
        let mut model = build_model::<f32>(&tiny_config(), 1).unwrap();
        let empty = LabeledSet::new(vec![], vec![]).unwrap();
        let (train_set, _) = toy_sets(4, 1);
        assert!(matches!(train(&mut model, &empty, &train_set), Err(Error::Data(_))));
        assert!(matches!(train(&mut model, &train_set, &empty), Err(Error::Data(_))));
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let mut config = tiny_config();
        config.learning_rate = 0.0;
        config.epochs = 3;
        let mut model = build_model::<f32>(&config, 3).unwrap();
        let before = model.params.snapshot();
        let (train_set, val_set) = toy_sets(6, 2);
        let log = train(&mut model, &train_set, &val_set).unwrap();
        let after = model.params.snapshot();
        for (b, a) in before.iter().zip(after.iter()) {
            assert_eq!(b.data(), a.data());
        }
        let first = log.entries[0].train_loss;
        assert!(log.entries.iter().all(|e| e.train_loss == first));
    }

    #[test]
    fn training_reduces_loss_on_separable_textures() {
        let mut config = tiny_config();
        config.epochs = 8;
        config.batch_size = 8;
        let mut model = build_model::<f32>(&config, 5).unwrap();
        let (train_set, val_set) = toy_sets(12, 9);
        let log = train(&mut model, &train_set, &val_set).unwrap();
        assert_eq!(log.entries.len(), 8);
        assert!(log.entries.iter().enumerate().all(|(i, e)| e.epoch == i + 1));
        let first = log.entries.first().unwrap().train_loss;
        let last = log.entries.last().unwrap().train_loss;
        assert!(last < first, "loss did not fall: {first} -> {last}");
        assert!(log.best_epoch >= 1);
        let (mean, std) = model.input_stats();
        assert!(std > 0.0 && mean.is_finite());
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let config = tiny_config();
        let (train_set, val_set) = toy_sets(6, 4);
        let mut a = build_model::<f32>(&config, 17).unwrap();
        let mut b = build_model::<f32>(&config, 17).unwrap();
        let log_a = train(&mut a, &train_set, &val_set).unwrap();
        let log_b = train(&mut b, &train_set, &val_set).unwrap();
        assert_eq!(log_a.entries, log_b.entries);
        for (pa, pb) in a.params.iter().zip(b.params.iter()) {
            assert_eq!(pa.value().data(), pb.value().data());
        }
    }

    #[test]
    fn donor_pretraining_and_transplant() {
        let config = tiny_config();
        let aux = synthetic::two_class_textures::<f32>(10, 8, 8, 33);
        let (donor, donor_log) = pretrain_donor(&aux, &config, 33).unwrap();
        assert_eq!(donor_log.entries.len(), config.donor_epochs);

        let model = build_model::<f32>(&config, 60).unwrap();
        let model = transplant_auxiliary(model, &donor).unwrap();
        for p in model.params().iter() {
            let is_aux = p.name().contains(".b.") || p.name().contains(".c.");
            assert_eq!(p.frozen(), is_aux, "unexpected freeze state on {}", p.name());
            if is_aux {
                let donor_id = donor.network().params().by_name(p.name()).unwrap();
                assert_eq!(p.value().data(), donor.network().params().value(donor_id).data());
            }
        }
    }

    #[test]
    fn frozen_branches_survive_training() {
        let mut config = tiny_config();
        config.epochs = 2;
        let aux = synthetic::two_class_textures::<f32>(8, 8, 8, 70);
        let (donor, _) = pretrain_donor(&aux, &config, 70).unwrap();
        let model = build_model::<f32>(&config, 71).unwrap();
        let mut model = transplant_auxiliary(model, &donor).unwrap();

        let frozen_before: Vec<_> = model
            .params()
            .iter()
            .filter(|p| p.frozen())
            .map(|p| (p.name().to_string(), p.value().clone()))
            .collect();
        let trainable_before: Vec<_> = model
            .params()
            .iter()
            .filter(|p| !p.frozen())
            .map(|p| p.value().clone())
            .collect();

        let (train_set, val_set) = toy_sets(6, 72);
        train(&mut model, &train_set, &val_set).unwrap();

        for (name, before) in &frozen_before {
            let id = model.params().by_name(name).unwrap();
            assert_eq!(model.params().value(id).data(), before.data(), "{name} moved");
        }
        let moved = model
            .params()
            .iter()
            .filter(|p| !p.frozen())
            .zip(trainable_before.iter())
            .any(|(p, before)| p.value().data() != before.data());
        assert!(moved, "no trainable parameter changed");
    }

    #[test]
    fn transplant_shape_mismatch_is_named() {
        let config = tiny_config();
        let mut donor_cfg = config.clone();
        donor_cfg.squeezed_widths = [3, 3, 3];
        donor_cfg.boosted_widths = [12, 12, 12];
        let aux = synthetic::two_class_textures::<f32>(5, 8, 8, 2);
        let (donor, _) = pretrain_donor(&aux, &donor_cfg, 2).unwrap();
        let model = build_model::<f32>(&config, 3).unwrap();
        match transplant_auxiliary(model, &donor) {
            Err(Error::Transplant(msg)) => assert!(msg.contains("stm1.b.squeeze.kernel")),
            other => panic!("expected a transplant error, got {other:?}"),
        }
    }

    #[test]
    fn serialized_log_is_run_stable() {
        let log = TrainLog {
            learning_rate: 1e-3,
            momentum: 0.9,
            epochs: 1,
            batch_size: 4,
            best_epoch: 1,
            entries: vec![TrainEpoch {
                epoch: 1,
                train_loss: 0.5,
                train_accuracy: 0.75,
                val_accuracy: 0.5,
            }],
            wall_seconds: 123.0,
        };
        let json = serde_json::to_string(&log).unwrap();
        assert!(!json.contains("wall"));
        let back: TrainLog = serde_json::from_str(&json).unwrap();
        assert_eq!(back.wall_seconds, 0.0);
        assert_eq!(back.entries, log.entries);
    }
}
