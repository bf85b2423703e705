use proptest::prelude::*;
use voxadapt_core::metrics::ConfusionMatrix;
use voxadapt_core::segmenter::{loss_and_grad, ClassifierParams, LabeledPixels, DESCRIPTOR_DIM};
use voxadapt_core::voxel_map::LabelLikelihood;
use voxadapt_core::Image;

proptest! {
    #[test]
    fn posterior_is_normalized(counts in prop::collection::vec(0u32..50, 2..10), eps in 0.01f64..0.9) {
        let lik = LabelLikelihood::new(counts.len(), eps);
        let p: f64 = lik.log_posterior(&counts).iter().map(|l| l.exp()).sum();
        prop_assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn posterior_argmax_follows_counts(counts in prop::collection::vec(0u32..50, 2..10), eps in 0.01f64..0.5) {
        // With ε below the uniform confusion level more evidence always wins.
        let c = counts.len();
        prop_assume!(eps < (c - 1) as f64 / c as f64);
        let lik = LabelLikelihood::new(c, eps);
        let lp = lik.log_posterior(&counts);
        let best = counts.iter().copied().max().unwrap();
        for (k, &n) in counts.iter().enumerate() {
            if n == best {
                prop_assert!(lp.iter().all(|&v| v <= lp[k] + 1e-12));
            }
        }
    }

    #[test]
    fn identical_predictions_score_perfectly(labels in prop::collection::vec(0u8..6, 1..64)) {
        let img = Image::from_vec(labels.len(), 1, labels).unwrap();
        let mut cm = ConfusionMatrix::new(6);
        cm.accumulate(&img, &img).unwrap();
        prop_assert_eq!(cm.accuracy(), 1.0);
        prop_assert_eq!(cm.miou(), 1.0);
    }

    #[test]
    fn accuracy_and_miou_are_fractions(
        pairs in prop::collection::vec((0u8..5, 0u8..5), 1..100)
    ) {
        let mut cm = ConfusionMatrix::new(5);
        for (p, g) in pairs {
            cm.add_pixel(p, g).unwrap();
        }
        prop_assert!((0.0..=1.0).contains(&cm.accuracy()));
        prop_assert!((0.0..=1.0).contains(&cm.miou()));
        prop_assert!(cm.miou() <= 1.0);
    }

    #[test]
    fn loss_is_finite_for_any_descriptor(
        values in prop::collection::vec(-50.0f64..50.0, DESCRIPTOR_DIM),
        label in 0u8..4,
        seed in 0u64..1000,
    ) {
        let params = ClassifierParams::init(4, seed, seed + 1);
        let mut d = [0.0; DESCRIPTOR_DIM];
        d.copy_from_slice(&values);
        let batch = [LabeledPixels { descriptors: vec![d], labels: vec![label] }];
        let (loss, grad) = loss_and_grad(&params, &batch).unwrap();
        prop_assert!(loss.is_finite() && loss >= 0.0);
        prop_assert!(grad.iter().all(|g| g.is_finite()));
    }
}
