//! Deep boosted ensemble learning for blood-smear malaria screening.
//!
//! The pipeline this crate implements, end to end:
//!
//! 1. **Enhancement** — grayscale conversion, one-level Haar wavelet
//!    analysis, and an approximation + diagonal-detail composite at half
//!    resolution ([`preprocess`]).
//! 2. **Network** — a split-transform-merge CNN with squeeze-boost channel
//!    fusion and donor-transplanted frozen auxiliary branches, trained with
//!    SGD + momentum ([`brstm`] on top of [`tensor`]).
//! 3. **Ensemble** — linear SVM, MLP, and AdaBoost.M1 over the network's
//!    penultimate features, fused by majority vote ([`ensemble`]).
//! 4. **Evaluation** — confusion metrics, ROC/PR curves with AUC, and
//!    top-3 PCA projections ([`metrics`]).
//!
//! All numeric code is generic over [`Scalar`]; production runs use `f32`,
//! gradient-check tests use `f64`. Every stochastic step takes an explicit
//! seed and runs single-threaded, so results are bit-reproducible.

pub mod brstm;
pub mod ensemble;
pub mod error;
pub mod metrics;
pub mod preprocess;
pub mod rng;
pub mod scalar;
pub mod synthetic;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Production-precision tensor.
pub type Tensor32 = tensor::Tensor<f32>;
/// Gradient-check-precision tensor.
pub type Tensor64 = tensor::Tensor<f64>;
