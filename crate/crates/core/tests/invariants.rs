//! Property-based invariants: randomized structural guarantees that hold
//! for every input, not just the worked examples in the unit tests.

use dbel::metrics::{confusion, report, roc_curve};
use dbel::preprocess::{ImageF, ImageU8, enhance, haar_dwt2, haar_idwt2, random_augment};
use dbel::tensor::ops;
use dbel::tensor::{Shape, Tensor};
use proptest::prelude::*;
use rand::Rng;

fn random_image(h: usize, w: usize, seed: u64) -> ImageF<f64> {
    let mut rng = dbel::rng::seeded(seed);
    let data = (0..h * w).map(|_| rng.random_range(0.0..=1.0)).collect();
    ImageF::new(h, w, data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn haar_synthesis_inverts_analysis(a in 1usize..12, b in 1usize..12, seed in any::<u64>()) {
        let (h, w) = (2 * a, 2 * b);
        let img = random_image(h, w, seed);
        let back = haar_idwt2(&haar_dwt2(&img)).unwrap();
        prop_assert_eq!((back.height, back.width), (h, w));
        for (x, y) in back.data.iter().zip(img.data()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn haar_analysis_preserves_energy(a in 1usize..12, b in 1usize..12, seed in any::<u64>()) {
        let img = random_image(2 * a, 2 * b, seed);
        let sub = haar_dwt2(&img);
        let image_energy: f64 = img.data().iter().map(|v| v * v).sum();
        let subband_energy: f64 = [&sub.ll, &sub.lh, &sub.hl, &sub.hh]
            .iter()
            .flat_map(|band| band.iter())
            .map(|v| v * v)
            .sum();
        prop_assert!((image_energy - subband_energy).abs() < 1e-9);
    }

    #[test]
    fn enhancement_halves_extents_into_unit_range(
        h in 1usize..20,
        w in 1usize..20,
        channels in prop::sample::select(vec![1usize, 3]),
        seed in any::<u64>(),
    ) {
        let mut rng = dbel::rng::seeded(seed);
        let data: Vec<u8> = (0..h * w * channels).map(|_| rng.random()).collect();
        let img = ImageU8::new(h, w, channels, data).unwrap();
        let out: ImageF<f64> = enhance(&img);
        prop_assert_eq!((out.height(), out.width()), (h.div_ceil(2), w.div_ceil(2)));
        prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn augmentation_preserves_extents_and_range(
        h in 4usize..24,
        w in 4usize..24,
        image_seed in any::<u64>(),
        draw_seed in any::<u64>(),
    ) {
        let img = random_image(h, w, image_seed);
        let mut rng = dbel::rng::seeded(draw_seed);
        let out = random_augment(&img, &mut rng);
        prop_assert_eq!((out.height(), out.width()), (h, w));
        prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn channel_split_inverts_concat(
        widths in prop::collection::vec(1usize..4, 1..5),
        n in 1usize..3,
        h in 1usize..4,
        w in 1usize..4,
        seed in any::<u64>(),
    ) {
        let mut rng = dbel::rng::seeded(seed);
        let parts: Vec<Tensor<f64>> = widths
            .iter()
            .map(|&c| {
                let shape = Shape::new(n, c, h, w);
                let data = (0..shape.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                Tensor::from_vec(shape, data).unwrap()
            })
            .collect();
        let refs: Vec<&Tensor<f64>> = parts.iter().collect();
        let merged = ops::channel_concat(&refs).unwrap();
        prop_assert_eq!(merged.shape().c, widths.iter().sum::<usize>());
        let split = ops::channel_split(&merged, &widths).unwrap();
        prop_assert_eq!(split.len(), parts.len());
        for (a, b) in split.iter().zip(&parts) {
            prop_assert_eq!(a.shape(), b.shape());
            prop_assert_eq!(a.data(), b.data());
        }
        // And merging the split pieces restores the original tensor.
        let again = ops::channel_concat(&split.iter().collect::<Vec<_>>()).unwrap();
        prop_assert_eq!(again.data(), merged.data());
    }

    #[test]
    fn softmax_is_shift_invariant_per_row(
        n in 1usize..4,
        c in 2usize..5,
        seed in any::<u64>(),
        shift in -3.0f64..3.0,
    ) {
        let mut rng = dbel::rng::seeded(seed);
        let shape = Shape::new(n, c, 1, 1);
        let logits: Vec<f64> = (0..n * c).map(|_| rng.random_range(-4.0..4.0)).collect();
        let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
        let targets: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let (loss_a, probs_a) =
            ops::softmax_crossentropy(&Tensor::from_vec(shape, logits).unwrap(), &targets).unwrap();
        let (loss_b, probs_b) =
            ops::softmax_crossentropy(&Tensor::from_vec(shape, shifted).unwrap(), &targets).unwrap();
        prop_assert!((loss_a - loss_b).abs() < 1e-9);
        for (a, b) in probs_a.data().iter().zip(probs_b.data()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        // Rows are probability distributions.
        for row in probs_a.data().chunks_exact(c) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|p| *p >= 0.0));
        }
    }

    #[test]
    fn curve_metrics_ignore_sample_order(n in 2usize..50, seed in any::<u64>()) {
        let mut rng = dbel::rng::seeded(seed);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64 / 5.0).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2) as u8).collect();
        labels[0] = 1;
        labels[n - 1] = 0;
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let scores_p: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
        let labels_p: Vec<u8> = order.iter().map(|&i| labels[i]).collect();
        let a = roc_curve(&scores, &labels).unwrap();
        let b = roc_curve(&scores_p, &labels_p).unwrap();
        prop_assert!((a.auc - b.auc).abs() < 1e-12);
        prop_assert_eq!(a.points, b.points);
    }

    #[test]
    fn self_agreement_scores_perfectly(labels in prop::collection::vec(0u8..2, 1..60)) {
        let r = report(confusion(&labels, &labels).unwrap()).unwrap();
        prop_assert_eq!(r.accuracy, 100.0);
        prop_assert_eq!(r.counts.false_positive + r.counts.false_negative, 0);
    }
}
