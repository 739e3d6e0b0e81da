//! The boosted split-transform-merge screening network.
//!
//! Geometry: a stem (3×3 conv → relu → 2×2 average pool) halves the input,
//! then three merge blocks each halve it again. A merge block runs four
//! parallel branches over its input — dilated 3×3 conv → relu → 1×1 squeeze
//! conv → 2×2 pool (max on branches b/d, average on c/e) — and concatenates
//! them, so the block's output width is four times its squeezed width. A 1×1
//! reduction conv plus global average pooling feeds a three-layer dense head
//! with dropout; the penultimate dense activations double as the feature
//! vector consumed by the classical classifiers.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, ChaCha8Rng};
use crate::scalar::Scalar;
use crate::tensor::ops::{self, Conv2dSpec};
use crate::tensor::{NodeId, ParamId, ParamStore, Shape, Tape, Tensor};

mod train;

pub use train::{
    DonorModel, LabeledSet, TrainEpoch, TrainLog, pretrain_donor, train, transplant_auxiliary,
};

/// Branch order inside a merge block; concatenation preserves it.
const BRANCHES: [(&str, PoolKind); 4] = [
    ("b", PoolKind::Max),
    ("c", PoolKind::Avg),
    ("d", PoolKind::Max),
    ("e", PoolKind::Avg),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PoolKind {
    Max,
    Avg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrstmConfig {
    pub input_height: usize,
    pub input_width: usize,
    pub input_channels: usize,
    /// Stem output channels.
    pub stem_width: usize,
    /// Per-branch 1×1 squeeze width of each merge block.
    pub squeezed_widths: [usize; 3],
    /// Concatenated block width; must be 4 × the squeezed width.
    pub boosted_widths: [usize; 3],
    /// Branch conv kernel extent (odd, so same-padding is exact).
    pub branch_kernel: usize,
    /// Dilation per branch b/c/d/e.
    pub branch_dilations: [usize; 4],
    /// 1×1 reduction width ahead of global average pooling.
    pub reduce_width: usize,
    /// Dense head widths; the last is the class count.
    pub head_widths: [usize; 3],
    /// Dropout after the first and second head layers (training only).
    pub dropout_rates: [f64; 2],
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Epoch budget for donor pretraining.
    pub donor_epochs: usize,
}

impl Default for BrstmConfig {
    fn default() -> Self {
        BrstmConfig {
            input_height: 82,
            input_width: 82,
            input_channels: 1,
            stem_width: 32,
            squeezed_widths: [32, 64, 128],
            boosted_widths: [128, 256, 512],
            branch_kernel: 3,
            branch_dilations: [1, 1, 2, 2],
            reduce_width: 128,
            head_widths: [512, 256, 2],
            dropout_rates: [0.5, 0.5],
            seed: 0,
            epochs: 10,
            batch_size: 32,
            learning_rate: 1e-3,
            momentum: 0.9,
            donor_epochs: 5,
        }
    }
}

impl BrstmConfig {
    /// A reduced geometry that trains in minutes on one core. Same topology,
    /// an eighth of the default channel widths.
    pub fn small() -> Self {
        BrstmConfig {
            stem_width: 8,
            squeezed_widths: [8, 16, 32],
            boosted_widths: [32, 64, 128],
            reduce_width: 64,
            head_widths: [128, 64, 2],
            epochs: 30,
            learning_rate: 1e-2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_height == 0 || self.input_width == 0 || self.input_channels == 0 {
            return Err(Error::Argument("input extents must be positive".into()));
        }
        if self.stem_width == 0 || self.reduce_width == 0 {
            return Err(Error::Argument("stem and reduce widths must be positive".into()));
        }
        for (i, (&s, &b)) in self
            .squeezed_widths
            .iter()
            .zip(&self.boosted_widths)
            .enumerate()
        {
            if s == 0 {
                return Err(Error::Argument(format!("squeezed width of block {} is zero", i + 1)));
            }
            if b != 4 * s {
                return Err(Error::Argument(format!(
                    "block {} boosted width {} is not 4 × squeezed width {}",
                    i + 1,
                    b,
                    s
                )));
            }
        }
        if self.branch_kernel == 0 || self.branch_kernel % 2 == 0 {
            return Err(Error::Argument(format!(
                "branch kernel extent {} must be odd",
                self.branch_kernel
            )));
        }
        if self.branch_dilations.contains(&0) {
            return Err(Error::Argument("branch dilations must be positive".into()));
        }
        if self.head_widths.contains(&0) {
            return Err(Error::Argument("head widths must be positive".into()));
        }
        if self.head_widths[2] != 2 {
            return Err(Error::Argument(format!(
                "head output width {} must equal the class count 2",
                self.head_widths[2]
            )));
        }
        for &r in &self.dropout_rates {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::Argument(format!("dropout rate {r} outside [0, 1)")));
            }
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Argument(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Argument(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if self.batch_size == 0 {
            return Err(Error::Argument("batch size must be positive".into()));
        }
        Ok(())
    }

    /// Feature width seen by the downstream classifiers.
    pub fn feature_width(&self) -> usize {
        self.head_widths[1]
    }
}

#[derive(Clone, Debug)]
pub struct BrstmModel<F: Scalar> {
    config: BrstmConfig,
    params: ParamStore<F>,
    input_mean: F,
    input_std: F,
}

struct Forward {
    logits: NodeId,
    features: NodeId,
}

pub fn build_model<F: Scalar>(config: &BrstmConfig, seed: u64) -> Result<BrstmModel<F>> {
    config.validate()?;
    let mut rng = rng::stream(seed, rng::STREAM_INIT);
    let mut params = ParamStore::new();
    let k = config.branch_kernel;

    add_conv(&mut params, &mut rng, "stem", config.input_channels, config.stem_width, k);
    let mut width = config.stem_width;
    for (i, &squeezed) in config.squeezed_widths.iter().enumerate() {
        for (branch, _) in BRANCHES {
            let base = format!("stm{}.{branch}", i + 1);
            add_conv(&mut params, &mut rng, &format!("{base}.conv"), width, width, k);
            add_conv(&mut params, &mut rng, &format!("{base}.squeeze"), width, squeezed, 1);
        }
        width = config.boosted_widths[i];
    }
    add_conv(&mut params, &mut rng, "reduce", width, config.reduce_width, 1);
    add_dense(&mut params, &mut rng, "head1", config.reduce_width, config.head_widths[0]);
    add_dense(&mut params, &mut rng, "head2", config.head_widths[0], config.head_widths[1]);
    add_dense(&mut params, &mut rng, "head3", config.head_widths[1], config.head_widths[2]);

    Ok(BrstmModel {
        config: config.clone(),
        params,
        input_mean: F::zero(),
        input_std: F::one(),
    })
}

/// He-style init: normal with variance 2 / fan-in; biases start at zero.
fn he_tensor<F: Scalar>(shape: Shape, fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor<F> {
    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("finite std");
    let data = (0..shape.len()).map(|_| F::cast(normal.sample(rng))).collect();
    Tensor::from_vec(shape, data).expect("length matches shape")
}

fn add_conv<F: Scalar>(
    params: &mut ParamStore<F>,
    rng: &mut ChaCha8Rng,
    base: &str,
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
) {
    let shape = Shape::new(out_ch, in_ch, kernel, kernel);
    let fan_in = in_ch * kernel * kernel;
    params.add(format!("{base}.kernel"), he_tensor(shape, fan_in, rng));
    params.add(format!("{base}.bias"), Tensor::zeros(Shape::new(1, out_ch, 1, 1)));
}

fn add_dense<F: Scalar>(
    params: &mut ParamStore<F>,
    rng: &mut ChaCha8Rng,
    base: &str,
    in_dim: usize,
    out_dim: usize,
) {
    let shape = Shape::new(in_dim, out_dim, 1, 1);
    params.add(format!("{base}.weight"), he_tensor(shape, in_dim, rng));
    params.add(format!("{base}.bias"), Tensor::zeros(Shape::new(1, out_dim, 1, 1)));
}

/// Runs one merge block in inference mode. `block` is 1-based.
pub fn stm_block_forward<F: Scalar>(
    model: &BrstmModel<F>,
    block: usize,
    x: &Tensor<F>,
) -> Result<Tensor<F>> {
    if !(1..=3).contains(&block) {
        return Err(Error::Argument(format!("block index {block} outside 1..=3")));
    }
    let mut tape = Tape::new();
    let node = tape.leaf(x.clone());
    let out = model.stm_on(&mut tape, node, block)?;
    Ok(tape.value(out).clone())
}

impl<F: Scalar> BrstmModel<F> {
    pub fn config(&self) -> &BrstmConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<F> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<F> {
        &mut self.params
    }

    /// Input standardization constants learned from the training pixels.
    pub fn input_stats(&self) -> (F, F) {
        (self.input_mean, self.input_std)
    }

    pub fn set_input_stats(&mut self, mean: F, std: F) -> Result<()> {
        if !mean.is_finite() || !std.is_finite() || std <= F::zero() {
            return Err(Error::Argument(format!(
                "input stats mean {mean} / std {std} must be finite with positive std"
            )));
        }
        self.input_mean = mean;
        self.input_std = std;
        Ok(())
    }

    /// Rebuilds a model from externally stored parts (persistence). The
    /// parameter set must match a freshly built model name-for-name and
    /// shape-for-shape.
    pub fn from_parts(
        config: BrstmConfig,
        params: ParamStore<F>,
        input_mean: F,
        input_std: F,
    ) -> Result<Self> {
        let reference = build_model::<F>(&config, 0)?;
        if params.len() != reference.params.len() {
            return Err(Error::Format(format!(
                "parameter count {} does not match the architecture's {}",
                params.len(),
                reference.params.len()
            )));
        }
        for expected in reference.params.iter() {
            let id = params.by_name(expected.name()).ok_or_else(|| {
                Error::Format(format!("missing parameter {}", expected.name()))
            })?;
            let got = params.get(id).shape();
            if got != expected.shape() {
                return Err(Error::Format(format!(
                    "parameter {} has shape {got}, architecture expects {}",
                    expected.name(),
                    expected.shape()
                )));
            }
        }
        let mut model = BrstmModel {
            config,
            params,
            input_mean: F::zero(),
            input_std: F::one(),
        };
        model.set_input_stats(input_mean, input_std)?;
        Ok(model)
    }

    fn pid(&self, name: &str) -> ParamId {
        self.params.by_name(name).expect("parameter registered at build")
    }

    fn check_input(&self, x: &Tensor<F>) -> Result<()> {
        let s = x.shape();
        let c = &self.config;
        if s.n == 0 || s.c != c.input_channels || s.h != c.input_height || s.w != c.input_width {
            return Err(Error::Dimension(format!(
                "input {s} does not match configured extents {}×{}×{}",
                c.input_height, c.input_width, c.input_channels
            )));
        }
        Ok(())
    }

    fn standardize(&self, x: &Tensor<F>) -> Tensor<F> {
        let mut out = x.clone();
        for v in out.data_mut() {
            *v = (*v - self.input_mean) / self.input_std;
        }
        out
    }

    /// Pool window clamped to the map extent so degenerate geometries
    /// (extent 1) pass through instead of erroring.
    fn pool_on(&self, tape: &mut Tape<F>, x: NodeId, kind: PoolKind) -> Result<NodeId> {
        let s = tape.value(x).shape();
        let window = 2.min(s.h).min(s.w);
        match kind {
            PoolKind::Max => tape.maxpool(x, window, window),
            PoolKind::Avg => tape.avgpool(x, window, window),
        }
    }

    fn stm_on(&self, tape: &mut Tape<F>, x: NodeId, block: usize) -> Result<NodeId> {
        let k = self.config.branch_kernel;
        let mut parts = Vec::with_capacity(BRANCHES.len());
        for (j, (branch, pool)) in BRANCHES.into_iter().enumerate() {
            let dil = self.config.branch_dilations[j];
            let base = format!("stm{block}.{branch}");
            let spec = Conv2dSpec::same(dil * (k - 1) / 2, dil);
            let mut z = tape.conv2d(
                &self.params,
                x,
                self.pid(&format!("{base}.conv.kernel")),
                self.pid(&format!("{base}.conv.bias")),
                spec,
            )?;
            z = tape.relu(z);
            z = tape.conv2d(
                &self.params,
                z,
                self.pid(&format!("{base}.squeeze.kernel")),
                self.pid(&format!("{base}.squeeze.bias")),
                Conv2dSpec::unit(),
            )?;
            z = self.pool_on(tape, z, pool)?;
            parts.push(z);
        }
        tape.channel_concat(&parts)
    }

    /// Records the whole network on `tape`. Dropout is active only when an
    /// rng is supplied; inference passes `None` and is deterministic.
    fn forward_on(
        &self,
        tape: &mut Tape<F>,
        x: NodeId,
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Forward> {
        let k = self.config.branch_kernel;
        let mut z = tape.conv2d(
            &self.params,
            x,
            self.pid("stem.kernel"),
            self.pid("stem.bias"),
            Conv2dSpec::same((k - 1) / 2, 1),
        )?;
        z = tape.relu(z);
        z = self.pool_on(tape, z, PoolKind::Avg)?;
        for block in 1..=3 {
            z = self.stm_on(tape, z, block)?;
        }
        z = tape.conv2d(
            &self.params,
            z,
            self.pid("reduce.kernel"),
            self.pid("reduce.bias"),
            Conv2dSpec::unit(),
        )?;
        z = tape.relu(z);
        z = tape.global_avgpool(z)?;

        let mut h = tape.dense(&self.params, z, self.pid("head1.weight"), self.pid("head1.bias"))?;
        h = tape.relu(h);
        h = maybe_dropout(tape, h, self.config.dropout_rates[0], &mut dropout_rng)?;
        h = tape.dense(&self.params, h, self.pid("head2.weight"), self.pid("head2.bias"))?;
        h = tape.relu(h);
        let features = h;
        h = maybe_dropout(tape, h, self.config.dropout_rates[1], &mut dropout_rng)?;
        let logits = tape.dense(&self.params, h, self.pid("head3.weight"), self.pid("head3.bias"))?;
        Ok(Forward { logits, features })
    }

    /// Inference logits, shape (n, classes, 1, 1).
    pub fn forward(&self, batch: &Tensor<F>) -> Result<Tensor<F>> {
        self.check_input(batch)?;
        let mut tape = Tape::new();
        let x = tape.leaf(self.standardize(batch));
        let fwd = self.forward_on(&mut tape, x, None)?;
        Ok(tape.value(fwd.logits).clone())
    }

    /// Predicted labels and class probabilities.
    pub fn predict(&self, batch: &Tensor<F>) -> Result<(Vec<u8>, Tensor<F>)> {
        let logits = self.forward(batch)?;
        let probs = softmax_rows(&logits);
        let s = probs.shape();
        let mut labels = Vec::with_capacity(s.n);
        for i in 0..s.n {
            let row = &probs.data()[i * s.c..(i + 1) * s.c];
            let mut best = 0;
            for (c, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = c;
                }
            }
            labels.push(best as u8);
        }
        Ok((labels, probs))
    }

    /// Penultimate dense activations (post-relu), shape (n, feature width, 1, 1).
    pub fn extract_features(&self, batch: &Tensor<F>) -> Result<Tensor<F>> {
        self.check_input(batch)?;
        let mut tape = Tape::new();
        let x = tape.leaf(self.standardize(batch));
        let fwd = self.forward_on(&mut tape, x, None)?;
        Ok(tape.value(fwd.features).clone())
    }

    /// Mean cross-entropy of the inference-mode forward pass.
    pub fn loss(&self, batch: &Tensor<F>, targets: &[usize]) -> Result<F> {
        let logits = self.forward(batch)?;
        let (loss, _) = ops::softmax_crossentropy(&logits, targets)?;
        Ok(loss)
    }

    /// Inference-mode forward + backward; gradients accumulate in the
    /// parameter store. Returns the loss.
    pub fn loss_backward(&mut self, batch: &Tensor<F>, targets: &[usize]) -> Result<F> {
        self.check_input(batch)?;
        let mut tape = Tape::new();
        let x = tape.leaf(self.standardize(batch));
        let fwd = self.forward_on(&mut tape, x, None)?;
        let (_, loss, _) = tape.softmax_crossentropy(fwd.logits, targets)?;
        tape.backward(&mut self.params)?;
        Ok(loss)
    }
}

fn maybe_dropout<F: Scalar>(
    tape: &mut Tape<F>,
    x: NodeId,
    rate: f64,
    rng: &mut Option<&mut ChaCha8Rng>,
) -> Result<NodeId> {
    match rng {
        Some(r) => tape.dropout(x, rate, r),
        None => Ok(x),
    }
}

fn softmax_rows<F: Scalar>(logits: &Tensor<F>) -> Tensor<F> {
    let s = logits.shape();
    let mut out = logits.clone();
    let data = out.data_mut();
    for i in 0..s.n {
        let row = &mut data[i * s.c..(i + 1) * s.c];
        let max = row.iter().cloned().fold(F::neg_infinity(), F::max);
        let mut sum = F::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

#[cfg(test)]
pub(crate) fn tiny_config() -> BrstmConfig {
    BrstmConfig {
        input_height: 8,
        input_width: 8,
        input_channels: 1,
        stem_width: 2,
        squeezed_widths: [2, 2, 2],
        boosted_widths: [8, 8, 8],
        branch_kernel: 3,
        branch_dilations: [1, 1, 2, 2],
        reduce_width: 4,
        head_widths: [8, 4, 2],
        dropout_rates: [0.5, 0.5],
        seed: 7,
        epochs: 3,
        batch_size: 4,
        learning_rate: 1e-2,
        momentum: 0.9,
        donor_epochs: 2,
    }
}
