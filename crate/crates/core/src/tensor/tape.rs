use super::ops::{self, Conv2dSpec};
use super::{ParamId, ParamStore, Shape, Tensor};
use crate::error::{Error, Result};
use crate::rng::ChaCha8Rng;
use crate::scalar::Scalar;

/// Handle to a value produced during a forward pass on a [`Tape`].
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct NodeId(usize);

enum Step<F> {
    Conv2d {
        x: NodeId,
        kernel: ParamId,
        bias: ParamId,
        kernel_value: Tensor<F>,
        spec: Conv2dSpec,
        out: NodeId,
    },
    Dense {
        x: NodeId,
        weights: ParamId,
        bias: ParamId,
        weights_value: Tensor<F>,
        out: NodeId,
    },
    Relu {
        x: NodeId,
        out: NodeId,
    },
    MaxPool {
        x: NodeId,
        mask: Vec<usize>,
        out: NodeId,
    },
    AvgPool {
        x: NodeId,
        window: usize,
        stride: usize,
        out: NodeId,
    },
    GlobalAvgPool {
        x: NodeId,
        out: NodeId,
    },
    Dropout {
        x: NodeId,
        rate: f64,
        mask: Vec<bool>,
        out: NodeId,
    },
    Concat {
        parts: Vec<NodeId>,
        widths: Vec<usize>,
        out: NodeId,
    },
    Flatten {
        x: NodeId,
        out: NodeId,
    },
    SoftmaxCe {
        logits: NodeId,
        probs: Tensor<F>,
        targets: Vec<usize>,
        out: NodeId,
    },
}

/// Per-node gradients produced by a backward pass.
pub struct Gradients<F> {
    grads: Vec<Option<Tensor<F>>>,
}

impl<F: Scalar> Gradients<F> {
    /// Gradient that reached `id`, if any path connected it to the seed.
    pub fn get(&self, id: NodeId) -> Option<&Tensor<F>> {
        self.grads[id.0].as_ref()
    }
}

/// Ordered record of one forward pass.
///
/// Each recording method executes the op eagerly, stores the result and
/// whatever backward needs (masks, parameter values at execution time),
/// and returns a [`NodeId`]. [`Tape::backward`] then walks the record in
/// exact reverse order, pushing gradients into the [`ParamStore`].
pub struct Tape<F> {
    values: Vec<Tensor<F>>,
    steps: Vec<Step<F>>,
}

impl<F: Scalar> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> Tape<F> {
    pub fn new() -> Self {
        Tape {
            values: Vec::new(),
            steps: Vec::new(),
        }
    }

    /// Registers an input tensor (no gradient producer of its own).
    pub fn leaf(&mut self, value: Tensor<F>) -> NodeId {
        self.values.push(value);
        NodeId(self.values.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Tensor<F> {
        &self.values[id.0]
    }

    fn push(&mut self, value: Tensor<F>) -> NodeId {
        self.values.push(value);
        NodeId(self.values.len() - 1)
    }

    pub fn conv2d(
        &mut self,
        store: &ParamStore<F>,
        x: NodeId,
        kernel: ParamId,
        bias: ParamId,
        spec: Conv2dSpec,
    ) -> Result<NodeId> {
        let kernel_value = store.value(kernel).clone();
        let out_t = ops::conv2d(&self.values[x.0], &kernel_value, store.value(bias), spec)?;
        let out = self.push(out_t);
        self.steps.push(Step::Conv2d {
            x,
            kernel,
            bias,
            kernel_value,
            spec,
            out,
        });
        Ok(out)
    }

    pub fn dense(
        &mut self,
        store: &ParamStore<F>,
        x: NodeId,
        weights: ParamId,
        bias: ParamId,
    ) -> Result<NodeId> {
        let weights_value = store.value(weights).clone();
        let out_t = ops::dense(&self.values[x.0], &weights_value, store.value(bias))?;
        let out = self.push(out_t);
        self.steps.push(Step::Dense {
            x,
            weights,
            bias,
            weights_value,
            out,
        });
        Ok(out)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let out_t = ops::relu(&self.values[x.0]);
        let out = self.push(out_t);
        self.steps.push(Step::Relu { x, out });
        out
    }

    pub fn maxpool(&mut self, x: NodeId, window: usize, stride: usize) -> Result<NodeId> {
        let (out_t, mask) = ops::maxpool2d(&self.values[x.0], window, stride)?;
        let out = self.push(out_t);
        self.steps.push(Step::MaxPool { x, mask, out });
        Ok(out)
    }

    pub fn avgpool(&mut self, x: NodeId, window: usize, stride: usize) -> Result<NodeId> {
        let out_t = ops::avgpool2d(&self.values[x.0], window, stride)?;
        let out = self.push(out_t);
        self.steps.push(Step::AvgPool {
            x,
            window,
            stride,
            out,
        });
        Ok(out)
    }

    pub fn global_avgpool(&mut self, x: NodeId) -> Result<NodeId> {
        let out_t = ops::global_avgpool(&self.values[x.0])?;
        let out = self.push(out_t);
        self.steps.push(Step::GlobalAvgPool { x, out });
        Ok(out)
    }

    pub fn dropout(&mut self, x: NodeId, rate: f64, rng: &mut ChaCha8Rng) -> Result<NodeId> {
        let (out_t, mask) = ops::dropout(&self.values[x.0], rate, rng)?;
        let out = self.push(out_t);
        self.steps.push(Step::Dropout { x, rate, mask, out });
        Ok(out)
    }

    pub fn channel_concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let tensors: Vec<&Tensor<F>> = parts.iter().map(|p| &self.values[p.0]).collect();
        let out_t = ops::channel_concat(&tensors)?;
        let widths = tensors.iter().map(|t| t.shape().c).collect();
        let out = self.push(out_t);
        self.steps.push(Step::Concat {
            parts: parts.to_vec(),
            widths,
            out,
        });
        Ok(out)
    }

    pub fn flatten(&mut self, x: NodeId) -> NodeId {
        let out_t = ops::flatten(&self.values[x.0]);
        let out = self.push(out_t);
        self.steps.push(Step::Flatten { x, out });
        out
    }

    /// Records the loss head. The returned node holds the scalar loss;
    /// [`Tape::backward`] seeds it with 1. Probabilities are cached on the
    /// step and also returned for prediction use.
    pub fn softmax_crossentropy(
        &mut self,
        logits: NodeId,
        targets: &[usize],
    ) -> Result<(NodeId, F, Tensor<F>)> {
        let (loss, probs) = ops::softmax_crossentropy(&self.values[logits.0], targets)?;
        let out = self.push(Tensor::from_vec(Shape::new(1, 1, 1, 1), vec![loss])?);
        self.steps.push(Step::SoftmaxCe {
            logits,
            probs: probs.clone(),
            targets: targets.to_vec(),
            out,
        });
        Ok((out, loss, probs))
    }

    /// Reverse pass seeded at the recorded loss node with gradient 1.
    pub fn backward(&self, store: &mut ParamStore<F>) -> Result<Gradients<F>> {
        let seeds: Vec<(NodeId, Tensor<F>)> = self
            .steps
            .iter()
            .filter_map(|s| match s {
                Step::SoftmaxCe { out, .. } => {
                    Some((*out, Tensor::filled(Shape::new(1, 1, 1, 1), F::one())))
                }
                _ => None,
            })
            .collect();
        if seeds.is_empty() {
            return Err(Error::State(
                "backward requires a recorded loss; no forward loss pass on this tape".into(),
            ));
        }
        self.run_backward(seeds, store)
    }

    /// Reverse pass seeded with an explicit gradient at an arbitrary node.
    pub fn backward_from(
        &self,
        node: NodeId,
        seed: &Tensor<F>,
        store: &mut ParamStore<F>,
    ) -> Result<Gradients<F>> {
        if self.steps.is_empty() {
            return Err(Error::State(
                "backward requires a completed forward pass; tape is empty".into(),
            ));
        }
        if seed.shape() != self.values[node.0].shape() {
            return Err(Error::Dimension(format!(
                "seed shape {} does not match node value shape {}",
                seed.shape(),
                self.values[node.0].shape()
            )));
        }
        self.run_backward(vec![(node, seed.clone())], store)
    }

    fn run_backward(
        &self,
        seeds: Vec<(NodeId, Tensor<F>)>,
        store: &mut ParamStore<F>,
    ) -> Result<Gradients<F>> {
        let mut grads: Vec<Option<Tensor<F>>> = vec![None; self.values.len()];
        for (node, seed) in seeds {
            add_grad(&mut grads[node.0], seed);
        }
        for step in self.steps.iter().rev() {
            match step {
                Step::Conv2d {
                    x,
                    kernel,
                    bias,
                    kernel_value,
                    spec,
                    out,
                } => {
                    let Some(g) = grads[out.0].clone() else { continue };
                    let (dx, dk, db) =
                        ops::conv2d_backward(&self.values[x.0], kernel_value, *spec, &g)?;
                    add_grad(&mut grads[x.0], dx);
                    store.accumulate_grad(*kernel, dk.data());
                    store.accumulate_grad(*bias, db.data());
                }
                Step::Dense {
                    x,
                    weights,
                    bias,
                    weights_value,
                    out,
                } => {
                    let Some(g) = grads[out.0].clone() else { continue };
                    let (dx, dw, db) =
                        ops::dense_backward(&self.values[x.0], weights_value, &g)?;
                    add_grad(&mut grads[x.0], dx);
                    store.accumulate_grad(*weights, dw.data());
                    store.accumulate_grad(*bias, db.data());
                }
                Step::Relu { x, out } => {
                    let Some(g) = grads[out.0].clone() else { continue };
                    add_grad(&mut grads[x.0], ops::relu_backward(&self.values[x.0], &g));
                }
                Step::MaxPool { x, mask, out } => {
                    let Some(g) = grads[out.0].clone() else { continue };
                    add_grad(
                        &mut grads[x.0],
                        ops::maxpool2d_backward(self.values[x.0].shape(), mask, &g)?,
                    );
                }
                Step::AvgPool {
                    x,
                    window,
                    stride,
                    out,
                } => {
                    let Some(g) = grads[out.0].clone() else { continue };
                    add_grad(
                        &mut grads[x.0],
                        ops::avgpool2d_backward(self.values[x.0].shape(), *window, *stride, &g)?,
                    );
                }
                Step::GlobalAvgPool { x, out } => {
                    let Some(g) = grads[out.0].clone() else { continue };
                    add_grad(
                        &mut grads[x.0],
                        ops::global_avgpool_backward(self.values[x.0].shape(), &g)?,
                    );
                }
                Step::Dropout { x, rate, mask, out } => {
                    let Some(g) = grads[out.0].clone() else { continue };
                    add_grad(&mut grads[x.0], ops::dropout_backward(mask, *rate, &g));
                }
                Step::Concat { parts, widths, out } => {
                    let Some(g) = grads[out.0].clone() else { continue };
                    let slices = ops::channel_split(&g, widths)?;
                    for (part, slice) in parts.iter().zip(slices) {
                        add_grad(&mut grads[part.0], slice);
                    }
                }
                Step::Flatten { x, out } => {
                    let Some(g) = grads[out.0].clone() else { continue };
                    let reshaped = g.reshaped(self.values[x.0].shape())?;
                    add_grad(&mut grads[x.0], reshaped);
                }
                Step::SoftmaxCe {
                    logits,
                    probs,
                    targets,
                    out,
                } => {
                    let Some(g) = grads[out.0].clone() else { continue };
                    let upstream = g.data()[0];
                    add_grad(
                        &mut grads[logits.0],
                        ops::softmax_crossentropy_backward(probs, targets, upstream),
                    );
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn add_grad<F: Scalar>(slot: &mut Option<Tensor<F>>, delta: Tensor<F>) {
    match slot {
        None => *slot = Some(delta),
        Some(g) => {
            debug_assert_eq!(g.shape(), delta.shape());
            for (a, b) in g.data_mut().iter_mut().zip(delta.data()) {
                *a += *b;
            }
        }
    }
}
