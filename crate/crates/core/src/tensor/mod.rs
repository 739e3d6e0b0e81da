//! Rank-4 tensors, parameters, differentiable operations, the gradient
//! tape, and the optimizer.

mod optim;
mod param;
mod tape;

pub mod ops;

pub use optim::SgdMomentum;
pub use param::{ParamId, ParamStore, Parameter};
pub use tape::{NodeId, Tape};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Extents of a rank-4 tensor in `(batch, channels, height, width)` order.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape { n, c, h, w }
    }

    /// Total element count.
    pub fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Linear offset of `(n, c, y, x)` in row-major NCHW order.
    #[inline]
    pub fn offset(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        ((n * self.c + c) * self.h + y) * self.w + x
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {}, {})", self.n, self.c, self.h, self.w)
    }
}

/// Dense rank-4 array with cheap clones (shared storage, copy-on-write).
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<F> {
    shape: Shape,
    data: Arc<Vec<F>>,
}

impl<F: Scalar> Tensor<F> {
    pub fn zeros(shape: Shape) -> Self {
        Tensor {
            shape,
            data: Arc::new(vec![F::zero(); shape.len()]),
        }
    }

    pub fn filled(shape: Shape, value: F) -> Self {
        Tensor {
            shape,
            data: Arc::new(vec![value; shape.len()]),
        }
    }

    /// Wraps an existing buffer; its length must match the shape.
    pub fn from_vec(shape: Shape, data: Vec<F>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::Dimension(format!(
                "buffer of {} elements cannot take shape {shape}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape,
            data: Arc::new(data),
        })
    }

    /// A `(rows, cols, 1, 1)` tensor from a row-major matrix buffer, the
    /// layout used for feature batches and dense-layer inputs.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        Tensor::from_vec(Shape::new(rows, cols, 1, 1), data)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    /// Mutable view; clones the storage first if it is shared.
    pub fn data_mut(&mut self) -> &mut [F] {
        Arc::make_mut(&mut self.data).as_mut_slice()
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> F {
        self.data[self.shape.offset(n, c, y, x)]
    }

    /// Same storage under a new shape of equal element count.
    pub fn reshaped(&self, shape: Shape) -> Result<Self> {
        if shape.len() != self.shape.len() {
            return Err(Error::Dimension(format!(
                "cannot reshape {} to {shape}",
                self.shape
            )));
        }
        Ok(Tensor {
            shape,
            data: Arc::clone(&self.data),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest absolute elementwise difference; shapes must match.
    pub fn max_abs_diff(&self, other: &Self) -> Result<F> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!(
                "cannot compare {} with {}",
                self.shape, other.shape
            )));
        }
        Ok(self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (*a - *b).abs())
            .fold(F::zero(), F::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_are_row_major_nchw() {
        let s = Shape::new(2, 3, 4, 5);
        assert_eq!(s.len(), 120);
        assert_eq!(s.offset(0, 0, 0, 0), 0);
        assert_eq!(s.offset(0, 0, 0, 1), 1);
        assert_eq!(s.offset(0, 0, 1, 0), 5);
        assert_eq!(s.offset(0, 1, 0, 0), 20);
        assert_eq!(s.offset(1, 0, 0, 0), 60);
        assert_eq!(s.offset(1, 2, 3, 4), 119);
    }

    #[test]
    fn from_vec_checks_length() {
        let r = Tensor::<f32>::from_vec(Shape::new(1, 1, 2, 2), vec![0.0; 3]);
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn clone_shares_then_diverges_on_write() {
        let a = Tensor::<f32>::filled(Shape::new(1, 1, 1, 2), 1.0);
        let mut b = a.clone();
        b.data_mut()[0] = 5.0;
        assert_eq!(a.data(), &[1.0, 1.0]);
        assert_eq!(b.data(), &[5.0, 1.0]);
    }

    #[test]
    fn reshape_shares_storage_and_checks_count() {
        let a = Tensor::<f64>::from_vec(Shape::new(1, 2, 1, 3), vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let b = a.reshaped(Shape::new(1, 6, 1, 1)).unwrap();
        assert_eq!(b.data(), a.data());
        assert!(a.reshaped(Shape::new(1, 5, 1, 1)).is_err());
    }

    #[test]
    fn finite_detects_nan() {
        let mut t = Tensor::<f32>::zeros(Shape::new(1, 1, 1, 4));
        assert!(t.is_finite());
        t.data_mut()[2] = f32::NAN;
        assert!(!t.is_finite());
    }
}
