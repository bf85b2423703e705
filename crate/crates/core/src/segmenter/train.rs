use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

use super::augment::{augment_pixels, AugmentConfig, Sample};
use super::mlp::{loss_and_grad, ClassifierParams, LabeledPixels};
use super::optim::{one_cycle_lr, sgd_step, TrainConfig};

/// Walks a freshly shuffled order of `n` items each epoch in consecutive
/// chunks of `per_step`, wrapping around at the end of the order so every
/// chunk is full and every item appears at least once per epoch.
#[derive(Debug, Clone)]
pub struct EpochSampler {
    n: usize,
    per_step: usize,
    seed: u64,
    epoch: Option<usize>,
    order: Vec<usize>,
}

impl EpochSampler {
    pub fn new(n: usize, per_step: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySource("no samples to draw from"));
        }
        Ok(Self {
            n,
            per_step,
            seed,
            epoch: None,
            order: Vec::new(),
        })
    }

    pub fn steps_per_epoch(&self) -> usize {
        if self.per_step == 0 {
            0
        } else {
            self.n.div_ceil(self.per_step)
        }
    }

    pub fn indices(&mut self, epoch: usize, step: usize) -> Vec<usize> {
        if self.epoch != Some(epoch) {
            self.order = (0..self.n).collect();
            self.order.shuffle(&mut rng::stream(self.seed, &[0xE90C, epoch as u64]));
            self.epoch = Some(epoch);
        }
        (0..self.per_step)
            .map(|i| self.order[(step * self.per_step + i) % self.n])
            .collect()
    }
}

/// Runs `epochs × steps_per_epoch` SGD steps under the one-cycle schedule.
/// `make_batch(epoch, step)` supplies the pixels of each step; steps whose
/// batch has no labelled pixel are skipped.
pub fn train_epochs(
    params: &mut ClassifierParams,
    cfg: &TrainConfig,
    steps_per_epoch: usize,
    mut make_batch: impl FnMut(usize, usize) -> Result<Vec<LabeledPixels>>,
) -> Result<()> {
    cfg.validate()?;
    let mut global = 0;
    for epoch in 0..cfg.epochs {
        for step in 0..steps_per_epoch {
            let batch = make_batch(epoch, step)?;
            let lr = one_cycle_lr(global, steps_per_epoch, cfg);
            global += 1;
            let (loss, grad) = match loss_and_grad(params, &batch) {
                Err(Error::EmptyBatch) => continue,
                other => other?,
            };
            if !loss.is_finite() {
                return Err(Error::Divergence);
            }
            sgd_step(params.theta_mut(), &grad, lr)?;
        }
    }
    Ok(())
}

/// Supervised training from scratch on ground-truth samples.
pub fn pretrain(
    dataset: &[Sample],
    classes: usize,
    cfg: &TrainConfig,
    aug: &AugmentConfig,
    seed: u64,
) -> Result<ClassifierParams> {
    cfg.validate()?;
    let mut params = ClassifierParams::init(
        classes,
        rng::derive_seed(seed, &[0xFEA7]),
        rng::derive_seed(seed, &[0x1417]),
    );
    let mut sampler = EpochSampler::new(dataset.len(), cfg.batch_size, seed)?;
    let spe = sampler.steps_per_epoch();
    let ff = params.featurizer().clone();
    train_epochs(&mut params, cfg, spe, |epoch, step| {
        Ok(sampler
            .indices(epoch, step)
            .into_iter()
            .enumerate()
            .map(|(slot, i)| {
                let s = rng::derive_seed(seed, &[0xA0, epoch as u64, step as u64, slot as u64]);
                augment_pixels(&dataset[i], s, aug, &ff, cfg.pixels_per_image)
            })
            .collect())
    })?;
    Ok(params)
}
