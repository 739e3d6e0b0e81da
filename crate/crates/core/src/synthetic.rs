//! Seeded synthetic two-class textures for donor pretraining and fast
//! end-to-end runs: smooth blob images vs the same blobs overlaid with an
//! oriented stripe pattern. The stripe term's mean matches the flat term
//! added to the smooth class, so the classes cannot be told apart by
//! brightness alone — only by texture.

use std::f64::consts::PI;

use rand::Rng;

use crate::brstm::LabeledSet;
use crate::preprocess::ImageF;
use crate::rng::{self, ChaCha8Rng};
use crate::scalar::Scalar;

/// `per_class` images of each class (label 0 = smooth, 1 = striped), all
/// `height`×`width`, grouped by class in order.
pub fn two_class_textures<F: Scalar>(
    per_class: usize,
    height: usize,
    width: usize,
    seed: u64,
) -> LabeledSet<F> {
    let mut rng = rng::stream(seed, rng::STREAM_TEXTURE);
    let mut images = Vec::with_capacity(2 * per_class);
    let mut labels = Vec::with_capacity(2 * per_class);
    for class in 0..2u8 {
        for _ in 0..per_class {
            images.push(texture_image(class, height, width, &mut rng));
            labels.push(class);
        }
    }
    LabeledSet::new(images, labels).expect("generator emits a consistent set")
}

fn texture_image<F: Scalar>(
    class: u8,
    height: usize,
    width: usize,
    rng: &mut ChaCha8Rng,
) -> ImageF<F> {
    let extent = height.min(width) as f64;
    let blobs: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(0.0..width as f64),
                rng.random_range(0.0..height as f64),
                rng.random_range(extent / 8.0..extent / 3.0),
                rng.random_range(0.2..0.5),
            )
        })
        .collect();
    let stripes = (class == 1).then(|| {
        (
            rng.random_range(0.0..PI),
            rng.random_range(4.0..8.0),
            rng.random_range(0.0..2.0 * PI),
        )
    });

    let mut data = Vec::with_capacity(height * width);
    for y in 0..height {
        for x in 0..width {
            let mut v = 0.15;
            for &(cx, cy, sigma, amp) in &blobs {
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                v += amp * (-d2 / (2.0 * sigma * sigma)).exp();
            }
            v += match stripes {
                Some((theta, wavelength, phase)) => {
                    let u = x as f64 * theta.cos() + y as f64 * theta.sin();
                    0.35 * 0.5 * (1.0 + (2.0 * PI * u / wavelength + phase).sin())
                }
                // Flat term equal to the stripe mean keeps class brightness
                // matched.
                None => 0.35 * 0.5,
            };
            v += rng.random_range(-0.05..0.05);
            data.push(F::cast(v.clamp(0.0, 1.0)));
        }
    }
    ImageF::new(height, width, data).expect("values clamped into [0, 1]")
}
