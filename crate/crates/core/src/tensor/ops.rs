//! Forward and backward implementations of the network operations.
//!
//! Every op is a pure function: tensors in, fresh tensors out, plus any
//! auxiliary state (masks) that backward needs. The [`Tape`](super::Tape)
//! composes them into a differentiable graph; the `*_backward` functions
//! here are its building blocks.
//!
//! Convolution is cross-correlation (no kernel flip) and supports stride,
//! zero-padding, and dilation. It is evaluated as im2col followed by a
//! dense matrix product, which is where virtually all training time goes.

use rand::Rng;

use super::{Shape, Tensor};
use crate::error::{Error, Result};
use crate::rng::ChaCha8Rng;
use crate::scalar::Scalar;

/// Stride / padding / dilation of one conv2d application (square in both
/// spatial directions).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2dSpec {
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl Conv2dSpec {
    /// Stride 1, no padding, no dilation.
    pub fn unit() -> Self {
        Conv2dSpec {
            stride: 1,
            padding: 0,
            dilation: 1,
        }
    }

    /// Stride 1 with the given padding and dilation; padding
    /// `dilation·(k−1)/2` preserves spatial extents for odd `k`.
    pub fn same(padding: usize, dilation: usize) -> Self {
        Conv2dSpec {
            stride: 1,
            padding,
            dilation,
        }
    }
}

/// Output extent of a strided, padded, dilated kernel sweep.
fn conv_extent(input: usize, padding: usize, k: usize, dilation: usize, stride: usize) -> Result<usize> {
    let effective = (k - 1) * dilation + 1;
    let padded = input + 2 * padding;
    if effective > padded {
        return Err(Error::Dimension(format!(
            "kernel extent {effective} (size {k}, dilation {dilation}) exceeds padded input {padded}"
        )));
    }
    Ok((padded - effective) / stride + 1)
}

/// Pooled output extent; windows always fit entirely inside the input.
fn pool_extent(input: usize, window: usize, stride: usize) -> usize {
    (input - window) / stride + 1
}

fn check_conv_args(spec: Conv2dSpec) -> Result<()> {
    if spec.stride == 0 || spec.dilation == 0 {
        return Err(Error::Argument(format!(
            "conv2d stride and dilation must be positive, got stride {} dilation {}",
            spec.stride, spec.dilation
        )));
    }
    Ok(())
}

/// Unpacks one sample into a `(c_in·kh·kw) × (oh·ow)` patch matrix so the
/// convolution becomes a single matrix product. Every entry is written
/// (out-of-bounds taps as zero), so the buffer may be reused across samples.
#[allow(clippy::too_many_arguments)]
fn im2col<F: Scalar>(
    x: &[F],
    xs: Shape,
    sample: usize,
    kh: usize,
    kw: usize,
    spec: Conv2dSpec,
    oh: usize,
    ow: usize,
    col: &mut [F],
) {
    let ohow = oh * ow;
    let p = spec.padding as isize;
    let s = spec.stride as isize;
    let d = spec.dilation as isize;
    for ci in 0..xs.c {
        let plane = &x[xs.offset(sample, ci, 0, 0)..xs.offset(sample, ci, 0, 0) + xs.h * xs.w];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = ((ci * kh + ky) * kw + kx) * ohow;
                let off_y = ky as isize * d - p;
                let off_x = kx as isize * d - p;
                for oy in 0..oh {
                    let iy = oy as isize * s + off_y;
                    let dst = &mut col[row + oy * ow..row + (oy + 1) * ow];
                    if iy < 0 || iy >= xs.h as isize {
                        dst.fill(F::zero());
                        continue;
                    }
                    let src_row = &plane[iy as usize * xs.w..(iy as usize + 1) * xs.w];
                    for (ox, v) in dst.iter_mut().enumerate() {
                        let ix = ox as isize * s + off_x;
                        *v = if ix < 0 || ix >= xs.w as isize {
                            F::zero()
                        } else {
                            src_row[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Scatter-add of a patch-matrix gradient back onto the input layout;
/// exact adjoint of [`im2col`].
#[allow(clippy::too_many_arguments)]
fn col2im_accumulate<F: Scalar>(
    col: &[F],
    xs: Shape,
    sample: usize,
    kh: usize,
    kw: usize,
    spec: Conv2dSpec,
    oh: usize,
    ow: usize,
    dx: &mut [F],
) {
    let ohow = oh * ow;
    let p = spec.padding as isize;
    let s = spec.stride as isize;
    let d = spec.dilation as isize;
    for ci in 0..xs.c {
        let base = xs.offset(sample, ci, 0, 0);
        for ky in 0..kh {
            for kx in 0..kw {
                let row = ((ci * kh + ky) * kw + kx) * ohow;
                let off_y = ky as isize * d - p;
                let off_x = kx as isize * d - p;
                for oy in 0..oh {
                    let iy = oy as isize * s + off_y;
                    if iy < 0 || iy >= xs.h as isize {
                        continue;
                    }
                    let src = &col[row + oy * ow..row + (oy + 1) * ow];
                    for (ox, v) in src.iter().enumerate() {
                        let ix = ox as isize * s + off_x;
                        if ix >= 0 && ix < xs.w as isize {
                            dx[base + iy as usize * xs.w + ix as usize] += *v;
                        }
                    }
                }
            }
        }
    }
}

/// Cross-correlation of `x (n, c_in, h, w)` with `kernel (c_out, c_in, kh,
/// kw)` plus a per-output-channel `bias (1, c_out, 1, 1)`.
pub fn conv2d<F: Scalar>(
    x: &Tensor<F>,
    kernel: &Tensor<F>,
    bias: &Tensor<F>,
    spec: Conv2dSpec,
) -> Result<Tensor<F>> {
    check_conv_args(spec)?;
    let xs = x.shape();
    let ks = kernel.shape();
    let (c_out, c_in, kh, kw) = (ks.n, ks.c, ks.h, ks.w);
    if xs.c != c_in {
        return Err(Error::Dimension(format!(
            "conv2d input has {} channels, kernel expects {c_in}",
            xs.c
        )));
    }
    if bias.shape() != Shape::new(1, c_out, 1, 1) {
        return Err(Error::Dimension(format!(
            "conv2d bias shape {} does not match {c_out} output channels",
            bias.shape()
        )));
    }
    let oh = conv_extent(xs.h, spec.padding, kh, spec.dilation, spec.stride)?;
    let ow = conv_extent(xs.w, spec.padding, kw, spec.dilation, spec.stride)?;
    let os = Shape::new(xs.n, c_out, oh, ow);

    let ck = c_in * kh * kw;
    let ohow = oh * ow;
    let mut col = vec![F::zero(); ck * ohow];
    let mut out = vec![F::zero(); os.len()];
    for b in 0..xs.n {
        im2col(x.data(), xs, b, kh, kw, spec, oh, ow, &mut col);
        let dst = &mut out[os.offset(b, 0, 0, 0)..os.offset(b, 0, 0, 0) + c_out * ohow];
        F::gemm(
            c_out, ck, ohow,
            F::one(),
            kernel.data(), ck as isize, 1,
            &col, ohow as isize, 1,
            F::zero(),
            dst, ohow as isize, 1,
        );
        for co in 0..c_out {
            let bv = bias.data()[co];
            for v in &mut dst[co * ohow..(co + 1) * ohow] {
                *v += bv;
            }
        }
    }
    Tensor::from_vec(os, out)
}

/// Gradients of [`conv2d`] w.r.t. input, kernel, and bias.
pub fn conv2d_backward<F: Scalar>(
    x: &Tensor<F>,
    kernel: &Tensor<F>,
    spec: Conv2dSpec,
    grad_out: &Tensor<F>,
) -> Result<(Tensor<F>, Tensor<F>, Tensor<F>)> {
    let xs = x.shape();
    let ks = kernel.shape();
    let (c_out, c_in, kh, kw) = (ks.n, ks.c, ks.h, ks.w);
    let os = grad_out.shape();
    let (oh, ow) = (os.h, os.w);
    let ck = c_in * kh * kw;
    let ohow = oh * ow;

    let mut dx = vec![F::zero(); xs.len()];
    let mut dk = vec![F::zero(); ks.len()];
    let mut db = vec![F::zero(); c_out];
    let mut col = vec![F::zero(); ck * ohow];
    let mut dcol = vec![F::zero(); ck * ohow];
    let g = grad_out.data();

    for b in 0..xs.n {
        let gb = &g[os.offset(b, 0, 0, 0)..os.offset(b, 0, 0, 0) + c_out * ohow];
        // dK += gb · colᵀ
        im2col(x.data(), xs, b, kh, kw, spec, oh, ow, &mut col);
        F::gemm(
            c_out, ohow, ck,
            F::one(),
            gb, ohow as isize, 1,
            &col, 1, ohow as isize,
            F::one(),
            &mut dk, ck as isize, 1,
        );
        // dcol = Kᵀ · gb, scattered back onto the input
        F::gemm(
            ck, c_out, ohow,
            F::one(),
            kernel.data(), 1, ck as isize,
            gb, ohow as isize, 1,
            F::zero(),
            &mut dcol, ohow as isize, 1,
        );
        col2im_accumulate(&dcol, xs, b, kh, kw, spec, oh, ow, &mut dx);
        for co in 0..c_out {
            db[co] += gb[co * ohow..(co + 1) * ohow].iter().copied().sum();
        }
    }
    Ok((
        Tensor::from_vec(xs, dx)?,
        Tensor::from_vec(ks, dk)?,
        Tensor::from_vec(Shape::new(1, c_out, 1, 1), db)?,
    ))
}

fn check_pool_args(xs: Shape, window: usize, stride: usize) -> Result<()> {
    if window == 0 || stride == 0 {
        return Err(Error::Argument(format!(
            "pool window and stride must be positive, got window {window} stride {stride}"
        )));
    }
    if window > xs.h || window > xs.w {
        return Err(Error::Dimension(format!(
            "pool window {window} exceeds input extents {}x{}",
            xs.h, xs.w
        )));
    }
    Ok(())
}

/// Per-window maximum. The mask records, per output element, the flat input
/// index that won; ties go to the first maximal element in row-major scan
/// order so backward routing is deterministic.
pub fn maxpool2d<F: Scalar>(
    x: &Tensor<F>,
    window: usize,
    stride: usize,
) -> Result<(Tensor<F>, Vec<usize>)> {
    let xs = x.shape();
    check_pool_args(xs, window, stride)?;
    let os = Shape::new(xs.n, xs.c, pool_extent(xs.h, window, stride), pool_extent(xs.w, window, stride));
    let mut out = vec![F::zero(); os.len()];
    let mut mask = vec![0usize; os.len()];
    let data = x.data();
    for b in 0..xs.n {
        for c in 0..xs.c {
            for oy in 0..os.h {
                for ox in 0..os.w {
                    let mut best_idx = xs.offset(b, c, oy * stride, ox * stride);
                    let mut best = data[best_idx];
                    for ky in 0..window {
                        for kx in 0..window {
                            let idx = xs.offset(b, c, oy * stride + ky, ox * stride + kx);
                            if data[idx] > best {
                                best = data[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    let o = os.offset(b, c, oy, ox);
                    out[o] = best;
                    mask[o] = best_idx;
                }
            }
        }
    }
    Ok((Tensor::from_vec(os, out)?, mask))
}

/// Routes each output gradient to the input element its window selected.
pub fn maxpool2d_backward<F: Scalar>(
    input_shape: Shape,
    mask: &[usize],
    grad_out: &Tensor<F>,
) -> Result<Tensor<F>> {
    let mut dx = vec![F::zero(); input_shape.len()];
    for (g, &idx) in grad_out.data().iter().zip(mask) {
        dx[idx] += *g;
    }
    Tensor::from_vec(input_shape, dx)
}

/// Per-window arithmetic mean (divide by window²).
pub fn avgpool2d<F: Scalar>(x: &Tensor<F>, window: usize, stride: usize) -> Result<Tensor<F>> {
    let xs = x.shape();
    check_pool_args(xs, window, stride)?;
    let os = Shape::new(xs.n, xs.c, pool_extent(xs.h, window, stride), pool_extent(xs.w, window, stride));
    let inv = F::one() / F::cast((window * window) as f64);
    let mut out = vec![F::zero(); os.len()];
    let data = x.data();
    for b in 0..xs.n {
        for c in 0..xs.c {
            for oy in 0..os.h {
                for ox in 0..os.w {
                    let mut acc = F::zero();
                    for ky in 0..window {
                        let row = xs.offset(b, c, oy * stride + ky, ox * stride);
                        acc += data[row..row + window].iter().copied().sum();
                    }
                    out[os.offset(b, c, oy, ox)] = acc * inv;
                }
            }
        }
    }
    Tensor::from_vec(os, out)
}

/// Spreads each output gradient uniformly over its window.
pub fn avgpool2d_backward<F: Scalar>(
    input_shape: Shape,
    window: usize,
    stride: usize,
    grad_out: &Tensor<F>,
) -> Result<Tensor<F>> {
    let os = grad_out.shape();
    let inv = F::one() / F::cast((window * window) as f64);
    let mut dx = vec![F::zero(); input_shape.len()];
    let g = grad_out.data();
    for b in 0..os.n {
        for c in 0..os.c {
            for oy in 0..os.h {
                for ox in 0..os.w {
                    let gv = g[os.offset(b, c, oy, ox)] * inv;
                    for ky in 0..window {
                        let row = input_shape.offset(b, c, oy * stride + ky, ox * stride);
                        for v in &mut dx[row..row + window] {
                            *v += gv;
                        }
                    }
                }
            }
        }
    }
    Tensor::from_vec(input_shape, dx)
}

/// Mean over all spatial positions, one value per (sample, channel).
pub fn global_avgpool<F: Scalar>(x: &Tensor<F>) -> Result<Tensor<F>> {
    let xs = x.shape();
    let inv = F::one() / F::cast((xs.h * xs.w) as f64);
    let mut out = vec![F::zero(); xs.n * xs.c];
    for b in 0..xs.n {
        for c in 0..xs.c {
            let start = xs.offset(b, c, 0, 0);
            let acc: F = x.data()[start..start + xs.h * xs.w].iter().copied().sum();
            out[b * xs.c + c] = acc * inv;
        }
    }
    Tensor::from_vec(Shape::new(xs.n, xs.c, 1, 1), out)
}

pub fn global_avgpool_backward<F: Scalar>(
    input_shape: Shape,
    grad_out: &Tensor<F>,
) -> Result<Tensor<F>> {
    let inv = F::one() / F::cast((input_shape.h * input_shape.w) as f64);
    let mut dx = vec![F::zero(); input_shape.len()];
    for b in 0..input_shape.n {
        for c in 0..input_shape.c {
            let gv = grad_out.data()[b * input_shape.c + c] * inv;
            let start = input_shape.offset(b, c, 0, 0);
            for v in &mut dx[start..start + input_shape.h * input_shape.w] {
                *v += gv;
            }
        }
    }
    Tensor::from_vec(input_shape, dx)
}

/// Affine map `x (n, d, 1, 1) · w (d, m, 1, 1) + b (1, m, 1, 1)`.
pub fn dense<F: Scalar>(x: &Tensor<F>, weights: &Tensor<F>, bias: &Tensor<F>) -> Result<Tensor<F>> {
    let xs = x.shape();
    let ws = weights.shape();
    if xs.h != 1 || xs.w != 1 {
        return Err(Error::Dimension(format!(
            "dense input must be flattened to (n, d, 1, 1), got {xs}"
        )));
    }
    let (d, m) = (ws.n, ws.c);
    if ws.h != 1 || ws.w != 1 || xs.c != d {
        return Err(Error::Dimension(format!(
            "dense weights {ws} incompatible with input {xs}"
        )));
    }
    if bias.shape() != Shape::new(1, m, 1, 1) {
        return Err(Error::Dimension(format!(
            "dense bias shape {} does not match width {m}",
            bias.shape()
        )));
    }
    let mut out = vec![F::zero(); xs.n * m];
    F::gemm(
        xs.n, d, m,
        F::one(),
        x.data(), d as isize, 1,
        weights.data(), m as isize, 1,
        F::zero(),
        &mut out, m as isize, 1,
    );
    for row in out.chunks_exact_mut(m) {
        for (v, bv) in row.iter_mut().zip(bias.data()) {
            *v += *bv;
        }
    }
    Tensor::from_vec(Shape::new(xs.n, m, 1, 1), out)
}

/// Gradients of [`dense`] w.r.t. input, weights, and bias.
pub fn dense_backward<F: Scalar>(
    x: &Tensor<F>,
    weights: &Tensor<F>,
    grad_out: &Tensor<F>,
) -> Result<(Tensor<F>, Tensor<F>, Tensor<F>)> {
    let xs = x.shape();
    let ws = weights.shape();
    let (d, m) = (ws.n, ws.c);
    let n = xs.n;
    let g = grad_out.data();

    // dX = g · Wᵀ
    let mut dx = vec![F::zero(); n * d];
    F::gemm(
        n, m, d,
        F::one(),
        g, m as isize, 1,
        weights.data(), 1, m as isize,
        F::zero(),
        &mut dx, d as isize, 1,
    );
    // dW = Xᵀ · g
    let mut dw = vec![F::zero(); d * m];
    F::gemm(
        d, n, m,
        F::one(),
        x.data(), 1, d as isize,
        g, m as isize, 1,
        F::zero(),
        &mut dw, m as isize, 1,
    );
    let mut db = vec![F::zero(); m];
    for row in g.chunks_exact(m) {
        for (acc, v) in db.iter_mut().zip(row) {
            *acc += *v;
        }
    }
    Ok((
        Tensor::from_vec(xs, dx)?,
        Tensor::from_vec(ws, dw)?,
        Tensor::from_vec(Shape::new(1, m, 1, 1), db)?,
    ))
}

/// Elementwise max(x, 0).
pub fn relu<F: Scalar>(x: &Tensor<F>) -> Tensor<F> {
    let mut out = x.clone();
    for v in out.data_mut() {
        if *v < F::zero() {
            *v = F::zero();
        }
    }
    out
}

/// Passes gradient only where the forward input was strictly positive.
pub fn relu_backward<F: Scalar>(x: &Tensor<F>, grad_out: &Tensor<F>) -> Tensor<F> {
    let mut dx = grad_out.clone();
    for (d, xv) in dx.data_mut().iter_mut().zip(x.data()) {
        if *xv <= F::zero() {
            *d = F::zero();
        }
    }
    dx
}

/// Training-mode dropout: zeroes each element with probability `rate` and
/// scales survivors by 1/(1−rate) so the expected value is unchanged.
/// `rate` 0 keeps everything. Inference mode is simply "don't call this".
pub fn dropout<F: Scalar>(
    x: &Tensor<F>,
    rate: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Tensor<F>, Vec<bool>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Argument(format!(
            "dropout rate must lie in [0, 1), got {rate}"
        )));
    }
    if rate == 0.0 {
        return Ok((x.clone(), vec![true; x.shape().len()]));
    }
    let scale = F::cast(1.0 / (1.0 - rate));
    let mut out = x.clone();
    let mut mask = vec![false; x.shape().len()];
    for (v, keep) in out.data_mut().iter_mut().zip(mask.iter_mut()) {
        *keep = rng.random::<f64>() >= rate;
        *v = if *keep { *v * scale } else { F::zero() };
    }
    Ok((out, mask))
}

pub fn dropout_backward<F: Scalar>(mask: &[bool], rate: f64, grad_out: &Tensor<F>) -> Tensor<F> {
    let scale = F::cast(1.0 / (1.0 - rate));
    let mut dx = grad_out.clone();
    for (d, keep) in dx.data_mut().iter_mut().zip(mask) {
        *d = if *keep { *d * scale } else { F::zero() };
    }
    dx
}

/// Concatenates along the channel axis, preserving part order.
pub fn channel_concat<F: Scalar>(parts: &[&Tensor<F>]) -> Result<Tensor<F>> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Argument("channel_concat of zero parts".into()))?;
    let fs = first.shape();
    let mut c_total = 0;
    for p in parts {
        let ps = p.shape();
        if (ps.n, ps.h, ps.w) != (fs.n, fs.h, fs.w) {
            return Err(Error::Dimension(format!(
                "channel_concat parts disagree: {fs} vs {ps}"
            )));
        }
        c_total += ps.c;
    }
    let os = Shape::new(fs.n, c_total, fs.h, fs.w);
    let plane = fs.h * fs.w;
    let mut out = vec![F::zero(); os.len()];
    for b in 0..fs.n {
        let mut c_base = 0;
        for p in parts {
            let ps = p.shape();
            let src = &p.data()[ps.offset(b, 0, 0, 0)..ps.offset(b, 0, 0, 0) + ps.c * plane];
            let dst_start = os.offset(b, c_base, 0, 0);
            out[dst_start..dst_start + ps.c * plane].copy_from_slice(src);
            c_base += ps.c;
        }
    }
    Tensor::from_vec(os, out)
}

/// Splits along the channel axis into the given widths; exact inverse of
/// [`channel_concat`].
pub fn channel_split<F: Scalar>(x: &Tensor<F>, widths: &[usize]) -> Result<Vec<Tensor<F>>> {
    let xs = x.shape();
    if widths.is_empty() || widths.iter().any(|&w| w == 0) {
        return Err(Error::Argument("channel_split widths must be positive".into()));
    }
    if widths.iter().sum::<usize>() != xs.c {
        return Err(Error::Dimension(format!(
            "channel_split widths sum {} != {} channels",
            widths.iter().sum::<usize>(),
            xs.c
        )));
    }
    let plane = xs.h * xs.w;
    let mut parts = Vec::with_capacity(widths.len());
    let mut c_base = 0;
    for &wc in widths {
        let ps = Shape::new(xs.n, wc, xs.h, xs.w);
        let mut data = vec![F::zero(); ps.len()];
        for b in 0..xs.n {
            let src_start = xs.offset(b, c_base, 0, 0);
            let dst_start = ps.offset(b, 0, 0, 0);
            data[dst_start..dst_start + wc * plane]
                .copy_from_slice(&x.data()[src_start..src_start + wc * plane]);
        }
        parts.push(Tensor::from_vec(ps, data)?);
        c_base += wc;
    }
    Ok(parts)
}

/// Collapses (c, h, w) into a single channel axis, sharing storage.
pub fn flatten<F: Scalar>(x: &Tensor<F>) -> Tensor<F> {
    let xs = x.shape();
    x.reshaped(Shape::new(xs.n, xs.c * xs.h * xs.w, 1, 1))
        .expect("flatten preserves element count")
}

/// Softmax with max-subtraction plus mean cross-entropy loss.
///
/// Returns `(loss, probabilities)`; rows of the probability tensor sum
/// to 1. The gradient w.r.t. the logits is `(probabilities − one-hot)/n`,
/// produced by [`softmax_crossentropy_backward`].
pub fn softmax_crossentropy<F: Scalar>(
    logits: &Tensor<F>,
    targets: &[usize],
) -> Result<(F, Tensor<F>)> {
    let ls = logits.shape();
    if ls.h != 1 || ls.w != 1 || ls.c < 2 {
        return Err(Error::Dimension(format!(
            "softmax_crossentropy expects logits (n, c≥2, 1, 1), got {ls}"
        )));
    }
    if targets.len() != ls.n {
        return Err(Error::Dimension(format!(
            "{} targets for {} logit rows",
            targets.len(),
            ls.n
        )));
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= ls.c) {
        return Err(Error::Argument(format!(
            "target class {t} out of range for {} classes",
            ls.c
        )));
    }
    let mut probs = vec![F::zero(); ls.len()];
    let mut loss = F::zero();
    for (i, &t) in targets.iter().enumerate() {
        let row = &logits.data()[i * ls.c..(i + 1) * ls.c];
        let max = row.iter().copied().fold(row[0], F::max);
        let dst = &mut probs[i * ls.c..(i + 1) * ls.c];
        let mut sum = F::zero();
        for (p, &v) in dst.iter_mut().zip(row) {
            *p = (v - max).exp();
            sum += *p;
        }
        for p in dst.iter_mut() {
            *p /= sum;
        }
        // −ln p[t] evaluated as ln Σe − (x[t] − max): stable even when
        // p[t] underflows.
        loss += sum.ln() - (row[t] - max);
    }
    let n = F::cast(ls.n as f64);
    Ok((loss / n, Tensor::from_vec(ls, probs)?))
}

/// `(probabilities − one-hot)/n`, scaled by the upstream loss gradient.
pub fn softmax_crossentropy_backward<F: Scalar>(
    probs: &Tensor<F>,
    targets: &[usize],
    upstream: F,
) -> Tensor<F> {
    let ls = probs.shape();
    let inv_n = upstream / F::cast(ls.n as f64);
    let mut dl = probs.clone();
    let data = dl.data_mut();
    for (i, &t) in targets.iter().enumerate() {
        let row = &mut data[i * ls.c..(i + 1) * ls.c];
        row[t] -= F::one();
        for v in row {
            *v *= inv_n;
        }
    }
    dl
}
