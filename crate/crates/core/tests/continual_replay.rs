use rand::Rng;
use voxadapt_core::continual::{adapt, build_buffer, AdaptConfig, ReplayBuffer};
use voxadapt_core::rng;
use voxadapt_core::segmenter::{ClassifierParams, Sample, TrainConfig};
use voxadapt_core::Image;

fn random_samples(n: usize, seed: u64) -> Vec<Sample> {
    let mut r = rng::stream(seed, &[]);
    (0..n)
        .map(|_| {
            let (w, h) = (12, 8);
            let labels = Image::from_fn(w, h, |u, _| (u * 3 / w) as u8);
            let features = Image::from_fn(w, h, |u, _| {
                let base = (u * 3 / w) as f64 / 3.0;
                [base + 0.05 * r.random::<f64>(), 0.5, 1.0 - base]
            });
            let depth = Image::filled(w, h, 1.5);
            Sample::new(features, depth, labels).unwrap()
        })
        .collect()
}

fn small_config() -> AdaptConfig {
    AdaptConfig {
        train: TrainConfig {
            epochs: 3,
            warmup_epochs: 1,
            pixels_per_image: 32,
            ..TrainConfig::default()
        },
        ..AdaptConfig::default()
    }
}

#[test]
fn finetune_ignores_buffer_contents() {
    let theta0 = ClassifierParams::init(3, 4, 5);
    let pseudo = random_samples(10, 1);
    let cfg = small_config().finetune();
    let a = adapt(&theta0, &pseudo, &ReplayBuffer::empty(), &cfg, 99).unwrap();
    let full = ReplayBuffer::from_samples(random_samples(7, 2));
    let b = adapt(&theta0, &pseudo, &full, &cfg, 99).unwrap();
    let same = a.theta().iter().zip(b.theta()).all(|(x, y)| x.to_bits() == y.to_bits());
    assert!(same);
    assert_ne!(a.theta(), theta0.theta());
}

#[test]
fn replay_run_is_deterministic_and_uses_the_buffer() {
    let theta0 = ClassifierParams::init(3, 4, 5);
    let pseudo = random_samples(10, 1);
    let buffer = build_buffer(&random_samples(40, 3), 0.1, 8).unwrap();
    assert_eq!(buffer.len(), 4);
    let cfg = small_config();
    let a = adapt(&theta0, &pseudo, &buffer, &cfg, 5).unwrap();
    let b = adapt(&theta0, &pseudo, &buffer, &cfg, 5).unwrap();
    assert_eq!(a, b);
    let other = build_buffer(&random_samples(40, 4), 0.1, 8).unwrap();
    assert_ne!(adapt(&theta0, &pseudo, &other, &cfg, 5).unwrap(), a);
}

#[test]
fn replay_needs_a_buffer() {
    let theta0 = ClassifierParams::init(3, 4, 5);
    let pseudo = random_samples(4, 1);
    assert!(adapt(&theta0, &pseudo, &ReplayBuffer::empty(), &small_config(), 1).is_err());
    assert!(adapt(&theta0, &[], &ReplayBuffer::empty(), &small_config().finetune(), 1).is_err());
}

#[test]
fn buffer_size_rounds_fraction() {
    let data = random_samples(25, 6);
    assert_eq!(build_buffer(&data, 0.1, 0).unwrap().len(), 3);
    assert_eq!(build_buffer(&data, 0.01, 0).unwrap().len(), 1);
    assert_eq!(build_buffer(&data, 1.0, 0).unwrap().len(), 25);
    assert!(build_buffer(&data, 0.0, 0).is_err());
    assert!(build_buffer(&[], 0.5, 0).is_err());
}
