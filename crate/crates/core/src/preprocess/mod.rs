//! Image preparation: grayscale conversion, one-level Haar wavelet
//! analysis/synthesis, the half-resolution enhanced composite the network
//! consumes, and affine training-time augmentation.

pub mod io;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::ChaCha8Rng;
use crate::scalar::Scalar;

/// 8-bit image, interleaved row-major samples, 1 (gray) or 3 (RGB) channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageU8 {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<u8>,
}

impl ImageU8 {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Format("empty image".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Format(format!(
                "unsupported channel count {channels} (want 1 or 3)"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::Format(format!(
                "{} samples for {height}x{width}x{channels} image",
                data.len()
            )));
        }
        Ok(ImageU8 {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    fn sample(&self, y: usize, x: usize, ch: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + ch]
    }
}

/// Single-channel real image with samples in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct ImageF<F> {
    height: usize,
    width: usize,
    data: Vec<F>,
}

impl<F: Scalar> ImageF<F> {
    pub fn new(height: usize, width: usize, data: Vec<F>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Format("empty image".into()));
        }
        if data.len() != height * width {
            return Err(Error::Format(format!(
                "{} samples for {height}x{width} image",
                data.len()
            )));
        }
        if let Some(v) = data
            .iter()
            .find(|v| !(v.is_finite() && **v >= F::zero() && **v <= F::one()))
        {
            return Err(Error::Format(format!(
                "sample {v} outside [0, 1]"
            )));
        }
        Ok(ImageF {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn at(&self, y: usize, x: usize) -> F {
        self.data[y * self.width + x]
    }
}

/// Untyped real plane: wavelet synthesis output, which may leave [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Plane<F> {
    pub height: usize,
    pub width: usize,
    pub data: Vec<F>,
}

/// The four half-resolution subbands of a one-level 2-D Haar analysis.
///
/// `height`/`width` are subband extents: ⌈h/2⌉ × ⌈w/2⌉ of the input, which
/// is edge-replicated to even extents first. Arrays are row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SubbandSet<F> {
    pub height: usize,
    pub width: usize,
    pub ll: Vec<F>,
    pub lh: Vec<F>,
    pub hl: Vec<F>,
    pub hh: Vec<F>,
}

/// Luma conversion: `(0.299 R + 0.587 G + 0.114 B)/255`, or `v/255` for
/// single-channel input.
pub fn to_grayscale<F: Scalar>(img: &ImageU8) -> ImageF<F> {
    let mut data = Vec::with_capacity(img.height * img.width);
    for y in 0..img.height {
        for x in 0..img.width {
            let luma = match img.channels {
                1 => img.sample(y, x, 0) as f64 / 255.0,
                _ => {
                    (0.299 * img.sample(y, x, 0) as f64
                        + 0.587 * img.sample(y, x, 1) as f64
                        + 0.114 * img.sample(y, x, 2) as f64)
                        / 255.0
                }
            };
            data.push(F::cast(luma));
        }
    }
    ImageF {
        height: img.height,
        width: img.width,
        data,
    }
}

/// Value at (y, x) of the image edge-replicated to even extents.
#[inline]
fn padded_at<F: Scalar>(img: &ImageF<F>, y: usize, x: usize) -> F {
    img.at(y.min(img.height - 1), x.min(img.width - 1))
}

/// One-level orthonormal Haar analysis. Per 2×2 block
/// `[[p00, p01], [p10, p11]]`:
///
/// ```text
/// LL = (p00 + p01 + p10 + p11)/2    HL = (p00 − p01 + p10 − p11)/2
/// LH = (p00 + p01 − p10 − p11)/2    HH = (p00 − p01 − p10 + p11)/2
/// ```
///
/// Odd extents are handled by edge replication, so this never fails.
pub fn haar_dwt2<F: Scalar>(img: &ImageF<F>) -> SubbandSet<F> {
    let sh = img.height.div_ceil(2);
    let sw = img.width.div_ceil(2);
    let half = F::cast(0.5);
    let mut ll = Vec::with_capacity(sh * sw);
    let mut lh = Vec::with_capacity(sh * sw);
    let mut hl = Vec::with_capacity(sh * sw);
    let mut hh = Vec::with_capacity(sh * sw);
    for by in 0..sh {
        for bx in 0..sw {
            let p00 = padded_at(img, 2 * by, 2 * bx);
            let p01 = padded_at(img, 2 * by, 2 * bx + 1);
            let p10 = padded_at(img, 2 * by + 1, 2 * bx);
            let p11 = padded_at(img, 2 * by + 1, 2 * bx + 1);
            ll.push((p00 + p01 + p10 + p11) * half);
            hl.push((p00 - p01 + p10 - p11) * half);
            lh.push((p00 + p01 - p10 - p11) * half);
            hh.push((p00 - p01 - p10 + p11) * half);
        }
    }
    SubbandSet {
        height: sh,
        width: sw,
        ll,
        lh,
        hl,
        hh,
    }
}

/// Exact inverse of [`haar_dwt2`] for even-extent inputs; output extents
/// are twice the subband extents.
pub fn haar_idwt2<F: Scalar>(sub: &SubbandSet<F>) -> Result<Plane<F>> {
    let len = sub.height * sub.width;
    if sub.height == 0 || sub.width == 0 {
        return Err(Error::Dimension("empty subbands".into()));
    }
    for (name, band) in [("LL", &sub.ll), ("LH", &sub.lh), ("HL", &sub.hl), ("HH", &sub.hh)] {
        if band.len() != len {
            return Err(Error::Dimension(format!(
                "{name} has {} samples, extents say {len}",
                band.len()
            )));
        }
    }
    let (h, w) = (sub.height * 2, sub.width * 2);
    let half = F::cast(0.5);
    let mut data = vec![F::zero(); h * w];
    for by in 0..sub.height {
        for bx in 0..sub.width {
            let i = by * sub.width + bx;
            let (ll, hl, lh, hh) = (sub.ll[i], sub.hl[i], sub.lh[i], sub.hh[i]);
            data[2 * by * w + 2 * bx] = (ll + hl + lh + hh) * half;
            data[2 * by * w + 2 * bx + 1] = (ll - hl + lh - hh) * half;
            data[(2 * by + 1) * w + 2 * bx] = (ll + hl - lh - hh) * half;
            data[(2 * by + 1) * w + 2 * bx + 1] = (ll - hl - lh + hh) * half;
        }
    }
    Ok(Plane {
        height: h,
        width: w,
        data,
    })
}

/// The model input image: grayscale → Haar analysis → LL + HH composite at
/// half resolution → min-max normalization to [0, 1]. A constant composite
/// (zero range) maps to all-zeros.
pub fn enhance<F: Scalar>(img: &ImageU8) -> ImageF<F> {
    let gray = to_grayscale::<F>(img);
    let sub = haar_dwt2(&gray);
    let mut composite: Vec<F> = sub
        .ll
        .iter()
        .zip(&sub.hh)
        .map(|(a, b)| *a + *b)
        .collect();
    let min = composite.iter().copied().fold(F::infinity(), F::min);
    let max = composite.iter().copied().fold(F::neg_infinity(), F::max);
    if max > min {
        let range = max - min;
        for v in &mut composite {
            *v = (*v - min) / range;
        }
    } else {
        composite.fill(F::zero());
    }
    ImageF {
        height: sub.height,
        width: sub.width,
        data: composite,
    }
}

/// Affine augmentation parameters. Applied in order: reflection, rotation
/// about the image center, shear — composed into one affine map sampled
/// bilinearly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentSpec {
    /// Degrees, within ±5.
    pub rotation_deg: f64,
    /// Horizontal shear factor, within ±0.05.
    pub shear: f64,
    pub reflect_x: bool,
    pub reflect_y: bool,
}

/// Largest allowed |rotation| in degrees.
pub const MAX_ROTATION_DEG: f64 = 5.0;
/// Largest allowed |shear| factor.
pub const MAX_SHEAR: f64 = 0.05;

impl AugmentSpec {
    pub fn identity() -> Self {
        AugmentSpec {
            rotation_deg: 0.0,
            shear: 0.0,
            reflect_x: false,
            reflect_y: false,
        }
    }

    fn is_identity(&self) -> bool {
        self.rotation_deg == 0.0 && self.shear == 0.0 && !self.reflect_x && !self.reflect_y
    }

    fn validate(&self) -> Result<()> {
        if !self.rotation_deg.is_finite() || self.rotation_deg.abs() > MAX_ROTATION_DEG {
            return Err(Error::Argument(format!(
                "rotation {} deg outside ±{MAX_ROTATION_DEG}",
                self.rotation_deg
            )));
        }
        if !self.shear.is_finite() || self.shear.abs() > MAX_SHEAR {
            return Err(Error::Argument(format!(
                "shear {} outside ±{MAX_SHEAR}",
                self.shear
            )));
        }
        Ok(())
    }
}

/// Applies `spec` to the image. Output extents equal input extents;
/// samples mapped from outside the source take value 0. The zero spec
/// returns the input bit-exactly.
pub fn augment<F: Scalar>(img: &ImageF<F>, spec: &AugmentSpec) -> Result<ImageF<F>> {
    spec.validate()?;
    if spec.is_identity() {
        return Ok(img.clone());
    }

    // Inverse map: for each output pixel, find its source point. With
    // forward A = Shear · Rot · Reflect (about the center), the inverse is
    // Reflect · Rot(−θ) · Shear(−s).
    let theta = spec.rotation_deg.to_radians();
    let (sin, cos) = theta.sin_cos();
    let s = spec.shear;
    let (rx, ry) = (
        if spec.reflect_x { -1.0 } else { 1.0 },
        if spec.reflect_y { -1.0 } else { 1.0 },
    );
    // rows of M = Reflect · Rot⁻¹ · Shear⁻¹, acting on (x, y):
    let m00 = rx * cos;
    let m01 = rx * (cos * -s + sin);
    let m10 = ry * -sin;
    let m11 = ry * (sin * s + cos);

    let (h, w) = (img.height, img.width);
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let mut data = Vec::with_capacity(h * w);
    for y in 0..h {
        let py = y as f64 - cy;
        for x in 0..w {
            let px = x as f64 - cx;
            let sx = m00 * px + m01 * py + cx;
            let sy = m10 * px + m11 * py + cy;
            data.push(bilinear(img, sy, sx));
        }
    }
    Ok(ImageF {
        height: h,
        width: w,
        data,
    })
}

/// Bilinear sample at real coordinates; 0 outside the source rectangle.
fn bilinear<F: Scalar>(img: &ImageF<F>, sy: f64, sx: f64) -> F {
    let (h, w) = (img.height as f64, img.width as f64);
    if sx < 0.0 || sy < 0.0 || sx > w - 1.0 || sy > h - 1.0 {
        return F::zero();
    }
    let x0 = sx.floor();
    let y0 = sy.floor();
    let fx = sx - x0;
    let fy = sy - y0;
    let x0 = x0 as usize;
    let y0 = y0 as usize;
    let x1 = (x0 + 1).min(img.width - 1);
    let y1 = (y0 + 1).min(img.height - 1);
    let v00 = img.at(y0, x0).to_f64().unwrap();
    let v01 = img.at(y0, x1).to_f64().unwrap();
    let v10 = img.at(y1, x0).to_f64().unwrap();
    let v11 = img.at(y1, x1).to_f64().unwrap();
    let top = v00 * (1.0 - fx) + v01 * fx;
    let bottom = v10 * (1.0 - fx) + v11 * fx;
    F::cast(top * (1.0 - fy) + bottom * fy)
}

/// Draws an [`AugmentSpec`] uniformly from the allowed ranges, reflections
/// each with probability ½. Draw order is fixed — rotation, shear,
/// reflect_x, reflect_y — so a given rng state always produces the same
/// spec.
pub fn sample_augment_spec(rng: &mut ChaCha8Rng) -> AugmentSpec {
    AugmentSpec {
        rotation_deg: rng.random_range(-MAX_ROTATION_DEG..=MAX_ROTATION_DEG),
        shear: rng.random_range(-MAX_SHEAR..=MAX_SHEAR),
        reflect_x: rng.random::<bool>(),
        reflect_y: rng.random::<bool>(),
    }
}

/// Applies a freshly sampled [`AugmentSpec`] — the per-epoch training
/// augmentation.
pub fn random_augment<F: Scalar>(img: &ImageF<F>, rng: &mut ChaCha8Rng) -> ImageF<F> {
    let spec = sample_augment_spec(rng);
    augment(img, &spec).expect("sampled spec is in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn gray_image(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> f64) -> ImageF<f64> {
        let data = (0..h * w).map(|i| f(i / w, i % w)).collect();
        ImageF::new(h, w, data).unwrap()
    }

    fn random_image(h: usize, w: usize, seed: u64) -> ImageF<f64> {
        let mut r = rng::seeded(seed);
        gray_image(h, w, |_, _| r.random::<f64>())
    }

    #[test]
    fn grayscale_weights() {
        let black = ImageU8::new(1, 1, 3, vec![0, 0, 0]).unwrap();
        assert_eq!(to_grayscale::<f64>(&black).data(), &[0.0]);

        let white = ImageU8::new(1, 1, 3, vec![255, 255, 255]).unwrap();
        assert!((to_grayscale::<f64>(&white).data()[0] - 1.0).abs() < 1e-12);

        let red = ImageU8::new(1, 1, 3, vec![255, 0, 0]).unwrap();
        assert!((to_grayscale::<f64>(&red).data()[0] - 0.299).abs() < 1e-12);

        let gray = ImageU8::new(1, 2, 1, vec![0, 255]).unwrap();
        assert_eq!(to_grayscale::<f64>(&gray).data(), &[0.0, 1.0]);
    }

    #[test]
    fn image_constructors_validate() {
        assert!(ImageU8::new(1, 1, 2, vec![0, 0]).is_err());
        assert!(ImageU8::new(2, 2, 1, vec![0; 3]).is_err());
        assert!(ImageF::<f64>::new(1, 2, vec![0.5, 1.5]).is_err());
        assert!(ImageF::<f64>::new(1, 2, vec![0.5, f64::NAN]).is_err());
    }

    #[test]
    fn dwt_block_formulas() {
        // Single 2×2 block [[1,2],[3,4]] scaled into [0,1].
        let img = gray_image(2, 2, |y, x| (1 + y * 2 + x) as f64 / 10.0);
        let sub = haar_dwt2(&img);
        assert_eq!((sub.height, sub.width), (1, 1));
        assert!((sub.ll[0] - 0.5).abs() < 1e-12);
        assert!((sub.hl[0] - -0.1).abs() < 1e-12);
        assert!((sub.lh[0] - -0.2).abs() < 1e-12);
        assert!(sub.hh[0].abs() < 1e-12);
    }

    #[test]
    fn dwt_of_constant_is_scaled_ll_only() {
        let img = gray_image(6, 4, |_, _| 0.3);
        let sub = haar_dwt2(&img);
        assert!(sub.ll.iter().all(|v| (*v - 0.6).abs() < 1e-12));
        assert!(sub.lh.iter().all(|v| v.abs() < 1e-12));
        assert!(sub.hl.iter().all(|v| v.abs() < 1e-12));
        assert!(sub.hh.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn dwt_preserves_energy_on_even_extents() {
        let img = random_image(8, 8, 11);
        let sub = haar_dwt2(&img);
        let input_energy: f64 = img.data().iter().map(|v| v * v).sum();
        let sub_energy: f64 = [&sub.ll, &sub.lh, &sub.hl, &sub.hh]
            .iter()
            .flat_map(|b| b.iter())
            .map(|v| v * v)
            .sum();
        assert!((input_energy - sub_energy).abs() < 1e-5);
    }

    #[test]
    fn dwt_pads_odd_extents_by_replication() {
        // 1×3 image: second block is [p2 p2; p2 p2] after replication.
        let img = ImageF::<f64>::new(1, 3, vec![0.2, 0.4, 0.8]).unwrap();
        let sub = haar_dwt2(&img);
        assert_eq!((sub.height, sub.width), (1, 2));
        assert!((sub.ll[1] - 1.6).abs() < 1e-12);
        assert!(sub.hh[1].abs() < 1e-12);
    }

    #[test]
    fn idwt_inverts_dwt() {
        let img = random_image(164, 164, 5);
        let back = haar_idwt2(&haar_dwt2(&img)).unwrap();
        assert_eq!((back.height, back.width), (164, 164));
        let max_err = img
            .data()
            .iter()
            .zip(&back.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-6, "max reconstruction error {max_err}");
    }

    #[test]
    fn idwt_of_ll_only_is_constant() {
        let sub = SubbandSet::<f64> {
            height: 2,
            width: 2,
            ll: vec![0.6; 4],
            lh: vec![0.0; 4],
            hl: vec![0.0; 4],
            hh: vec![0.0; 4],
        };
        let img = haar_idwt2(&sub).unwrap();
        assert!(img.data.iter().all(|v| (*v - 0.3).abs() < 1e-12));
    }

    #[test]
    fn idwt_of_single_hh_impulse() {
        let sub = SubbandSet {
            height: 1,
            width: 1,
            ll: vec![0.0],
            lh: vec![0.0],
            hl: vec![0.0],
            hh: vec![1.0],
        };
        let img = haar_idwt2(&sub).unwrap();
        assert_eq!(img.data, vec![0.5, -0.5, -0.5, 0.5]);
    }

    #[test]
    fn idwt_rejects_inconsistent_extents() {
        let sub = SubbandSet {
            height: 2,
            width: 2,
            ll: vec![0.0; 4],
            lh: vec![0.0; 3],
            hl: vec![0.0; 4],
            hh: vec![0.0; 4],
        };
        assert!(matches!(haar_idwt2(&sub), Err(Error::Dimension(_))));
    }

    #[test]
    fn enhance_halves_extents() {
        let data: Vec<u8> = (0..164 * 164 * 3).map(|i| (i % 251) as u8).collect();
        let img = ImageU8::new(164, 164, 3, data).unwrap();
        let out = enhance::<f32>(&img);
        assert_eq!((out.height(), out.width()), (82, 82));
        assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn enhance_odd_extents_round_up() {
        let img = ImageU8::new(7, 9, 1, (0..63).map(|i| i as u8 * 4).collect()).unwrap();
        let out = enhance::<f64>(&img);
        assert_eq!((out.height(), out.width()), (4, 5));
    }

    #[test]
    fn enhance_constant_maps_to_zeros() {
        let img = ImageU8::new(8, 8, 1, vec![137; 64]).unwrap();
        let out = enhance::<f64>(&img);
        assert!(out.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn enhance_checkerboard_keeps_diagonal_detail() {
        // Both phases of a period-2 checkerboard side by side: LL is
        // constant, |HH| is maximal with opposite signs, so the enhanced
        // composite must be non-constant.
        let img = ImageU8::new(
            2,
            4,
            1,
            vec![255, 0, 0, 255, 0, 255, 255, 0],
        )
        .unwrap();
        let gray = to_grayscale::<f64>(&img);
        let sub = haar_dwt2(&gray);
        assert!(sub.ll.iter().all(|v| (*v - sub.ll[0]).abs() < 1e-12));
        assert!(sub.hh.iter().all(|v| (v.abs() - 1.0).abs() < 1e-12));
        assert_eq!(sub.hh[0], -sub.hh[1]);
        let out = enhance::<f64>(&img);
        let first = out.data()[0];
        assert!(out.data().iter().any(|v| (*v - first).abs() > 0.5));
    }

    #[test]
    fn zero_spec_augment_is_bit_exact_identity() {
        let img = random_image(13, 9, 3);
        let out = augment(&img, &AugmentSpec::identity()).unwrap();
        assert_eq!(out.data(), img.data());
    }

    #[test]
    fn x_reflection_reverses_columns() {
        let img = gray_image(2, 2, |y, x| (1 + y * 2 + x) as f64 / 10.0);
        let spec = AugmentSpec {
            reflect_x: true,
            ..AugmentSpec::identity()
        };
        let out = augment(&img, &spec).unwrap();
        assert_eq!(out.data(), &[0.2, 0.1, 0.4, 0.3]);
    }

    #[test]
    fn y_reflection_reverses_rows() {
        let img = gray_image(2, 2, |y, x| (1 + y * 2 + x) as f64 / 10.0);
        let spec = AugmentSpec {
            reflect_y: true,
            ..AugmentSpec::identity()
        };
        let out = augment(&img, &spec).unwrap();
        assert_eq!(out.data(), &[0.3, 0.4, 0.1, 0.2]);
    }

    #[test]
    fn rotation_round_trip_is_near_identity_on_smooth_image() {
        let img = gray_image(32, 32, |y, x| (x + y) as f64 / 62.0);
        let plus = AugmentSpec {
            rotation_deg: 5.0,
            ..AugmentSpec::identity()
        };
        let minus = AugmentSpec {
            rotation_deg: -5.0,
            ..AugmentSpec::identity()
        };
        let back = augment(&augment(&img, &plus).unwrap(), &minus).unwrap();
        // Interior comparison: the border loses real content to the
        // out-of-bounds zero fill.
        let mut total = 0.0;
        let mut count = 0;
        for y in 4..28 {
            for x in 4..28 {
                total += (back.at(y, x) - img.at(y, x)).abs();
                count += 1;
            }
        }
        assert!(total / count as f64 <= 0.05);
    }

    #[test]
    fn augment_preserves_extents_and_range() {
        let img = random_image(21, 17, 8);
        let spec = AugmentSpec {
            rotation_deg: 3.5,
            shear: -0.04,
            reflect_x: true,
            reflect_y: false,
        };
        let out = augment(&img, &spec).unwrap();
        assert_eq!((out.height(), out.width()), (21, 17));
        assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn augment_rejects_out_of_range_spec() {
        let img = random_image(4, 4, 1);
        let spec = AugmentSpec {
            rotation_deg: 5.01,
            ..AugmentSpec::identity()
        };
        assert!(matches!(augment(&img, &spec), Err(Error::Argument(_))));
        let spec = AugmentSpec {
            shear: 0.06,
            ..AugmentSpec::identity()
        };
        assert!(matches!(augment(&img, &spec), Err(Error::Argument(_))));
    }

    #[test]
    fn random_augment_is_deterministic_per_seed() {
        let img = random_image(16, 16, 2);
        let a = random_augment(&img, &mut rng::seeded(77));
        let b = random_augment(&img, &mut rng::seeded(77));
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn sampled_specs_stay_in_range() {
        let mut r = rng::seeded(123);
        let mut seen_flip = false;
        for _ in 0..10_000 {
            let spec = sample_augment_spec(&mut r);
            assert!(spec.rotation_deg.abs() <= 5.0);
            assert!(spec.shear.abs() <= 0.05);
            seen_flip |= spec.reflect_x || spec.reflect_y;
        }
        assert!(seen_flip);
    }
}
