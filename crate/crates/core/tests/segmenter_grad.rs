use rand::Rng;
use voxadapt_core::rng::{self, StreamRng};
use voxadapt_core::segmenter::{
    loss_and_grad, loss_sum_and_grad, one_cycle_lr, ClassifierParams, Descriptor, LabeledPixels, TrainConfig,
    DESCRIPTOR_DIM,
};
use voxadapt_core::UNDEFINED;

fn random_pixels(r: &mut StreamRng, classes: usize, n: usize) -> LabeledPixels {
    let mut px = LabeledPixels::default();
    for _ in 0..n {
        let mut d: Descriptor = [0.0; DESCRIPTOR_DIM];
        d.iter_mut().for_each(|v| *v = rng::uniform(r, -1.0, 1.0));
        px.descriptors.push(d);
        // A few masked pixels exercise the UNDEFINED path.
        let label = if r.random::<f64>() < 0.1 { UNDEFINED } else { r.random_range(0..classes) as u8 };
        px.labels.push(label);
    }
    px
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut r = rng::stream(77, &[]);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for draw in 0..20u64 {
        let classes = r.random_range(2..=8usize);
        let params = ClassifierParams::init(classes, draw, 1000 + draw);
        let batch: Vec<_> = (0..r.random_range(1..=3)).map(|_| random_pixels(&mut r, classes, 12)).collect();
        let (_, grad) = loss_and_grad(&params, &batch).unwrap();
        for (i, &g) in grad.iter().enumerate() {
            let mut plus = params.clone();
            plus.theta_mut()[i] += h;
            let mut minus = params.clone();
            minus.theta_mut()[i] -= h;
            let fd = (loss_and_grad(&plus, &batch).unwrap().0 - loss_and_grad(&minus, &batch).unwrap().0) / (2.0 * h);
            let rel = (fd - g).abs() / g.abs().max(fd.abs()).max(1e-3);
            worst = worst.max(rel);
        }
    }
    assert!(worst <= 1e-4, "max relative error {worst:e}");
}

#[test]
fn mixed_batch_loss_is_pixel_weighted_mean_of_parts() {
    let mut r = rng::stream(5, &[]);
    let params = ClassifierParams::init(6, 1, 2);
    let pseudo: Vec<_> = (0..6).map(|_| random_pixels(&mut r, 6, 40)).collect();
    let replay: Vec<_> = (0..2).map(|_| random_pixels(&mut r, 6, 17)).collect();
    let (lp, _) = loss_and_grad(&params, &pseudo).unwrap();
    let (lr, _) = loss_and_grad(&params, &replay).unwrap();
    let np = loss_sum_and_grad(&params, &pseudo).unwrap().count as f64;
    let nr = loss_sum_and_grad(&params, &replay).unwrap().count as f64;
    let union: Vec<_> = pseudo.iter().chain(&replay).cloned().collect();
    let (lu, _) = loss_and_grad(&params, &union).unwrap();
    assert!((lu - (np * lp + nr * lr) / (np + nr)).abs() < 1e-9);
}

#[test]
fn huge_logits_keep_loss_finite() {
    let mut params = ClassifierParams::zeros(4, 0);
    let n = params.theta().len();
    // Output biases sit at the end of θ.
    params.theta_mut()[n - 4..].copy_from_slice(&[1e3, -1e3, 0.0, 5e2]);
    let batch = [LabeledPixels {
        descriptors: vec![[0.0; DESCRIPTOR_DIM]; 4],
        labels: vec![0, 1, 2, 3],
    }];
    let (loss, grad) = loss_and_grad(&params, &batch).unwrap();
    assert!(loss.is_finite() && grad.iter().all(|g| g.is_finite()));
    assert!((loss - (0.0 + 2e3 + 1e3 + 5e2) / 4.0).abs() < 1e-9);
}

#[test]
fn additive_logit_shift_keeps_argmax() {
    let mut r = rng::stream(9, &[]);
    let params = ClassifierParams::init(5, 3, 4);
    let mut shifted = params.clone();
    let n = shifted.theta().len();
    for b in &mut shifted.theta_mut()[n - 5..] {
        *b += 37.5;
    }
    let px = random_pixels(&mut r, 5, 200);
    for d in &px.descriptors {
        let a = params.logits(d);
        let b = shifted.logits(d);
        let argmax = |v: &[f64]| v.iter().enumerate().fold(0, |m, (i, x)| if *x > v[m] { i } else { m });
        assert_eq!(argmax(&a), argmax(&b));
    }
}

#[test]
fn schedule_endpoints_are_exact() {
    let cfg = TrainConfig::default();
    let spe = 13;
    assert!((one_cycle_lr(0, spe, &cfg) - 1e-6).abs() <= 1e-9);
    assert!((one_cycle_lr(5 * spe, spe, &cfg) - 0.05).abs() <= 1e-9);
    assert!((one_cycle_lr(50 * spe - 1, spe, &cfg) - 1e-3).abs() <= 1e-9);
    let mut prev = f64::INFINITY;
    for step in 5 * spe..50 * spe {
        let lr = one_cycle_lr(step, spe, &cfg);
        assert!(lr <= prev);
        prev = lr;
    }
}
