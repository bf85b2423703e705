use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::segmenter::{augment_pixels, AugmentConfig, FourierFeatures, EpochSampler, LabeledPixels, Sample, TrainConfig};

use super::ReplayBuffer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptConfig {
    /// Pseudo-labelled : replayed samples per batch.
    pub replay_ratio: (u32, u32),
    pub buffer_fraction: f64,
    pub iterations: usize,
    pub train: TrainConfig,
    pub augment: AugmentConfig,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            replay_ratio: (4, 1),
            buffer_fraction: 0.1,
            iterations: 1,
            train: TrainConfig::default(),
            augment: AugmentConfig::default(),
        }
    }
}

impl AdaptConfig {
    /// Same schedule without replay.
    pub fn finetune(&self) -> Self {
        Self {
            replay_ratio: (1, 0),
            ..self.clone()
        }
    }

    /// `(pseudo, replay)` samples per batch; the replay share is rounded.
    pub fn split(&self) -> (usize, usize) {
        let (p, r) = self.replay_ratio;
        let b = self.train.batch_size;
        let total = f64::from(p) + f64::from(r);
        let replay = if total > 0.0 {
            (libm::round(b as f64 * f64::from(r) / total) as usize).min(b)
        } else {
            0
        };
        (b - replay, replay)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.replay_ratio.0 == 0 {
            return Err(Error::InvalidConfig("replay ratio needs a pseudo-label share"));
        }
        if self.split().0 == 0 {
            return Err(Error::InvalidConfig("batch leaves no room for pseudo-labelled samples"));
        }
        if !(self.buffer_fraction > 0.0 && self.buffer_fraction <= 1.0) {
            return Err(Error::InvalidConfig("buffer fraction must be in (0, 1]"));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("need at least one iteration"));
        }
        Ok(())
    }
}

/// Sample indices of one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    pub pseudo: Vec<usize>,
    pub replay: Vec<usize>,
}

/// Draws mixed batches: pseudo-labelled samples walk an epoch-wise shuffled
/// order, replayed samples are drawn uniformly with replacement.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    pseudo: EpochSampler,
    replay_per_batch: usize,
    buffer_len: usize,
    seed: u64,
}

impl BatchSampler {
    pub fn new(pseudo_len: usize, buffer_len: usize, cfg: &AdaptConfig, seed: u64) -> Result<Self> {
        let (n_pseudo, n_replay) = cfg.split();
        if n_replay > 0 && buffer_len == 0 {
            return Err(Error::EmptySource("replay buffer is empty"));
        }
        if pseudo_len == 0 {
            return Err(Error::EmptySource("no pseudo-labelled samples"));
        }
        Ok(Self {
            pseudo: EpochSampler::new(pseudo_len, n_pseudo, seed)?,
            replay_per_batch: n_replay,
            buffer_len,
            seed,
        })
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.pseudo.steps_per_epoch()
    }

    pub fn plan(&mut self, epoch: usize, step: usize) -> BatchPlan {
        let mut r = rng::stream(self.seed, &[0x2E, epoch as u64, step as u64]);
        BatchPlan {
            pseudo: self.pseudo.indices(epoch, step),
            replay: (0..self.replay_per_batch)
                .map(|_| r.random_range(0..self.buffer_len))
                .collect(),
        }
    }

    /// Augmented training pixels of one step, pseudo-labelled samples first.
    #[allow(clippy::too_many_arguments)]
    pub fn sample_batch(
        &mut self,
        pseudo: &[Sample],
        buffer: &ReplayBuffer,
        cfg: &AdaptConfig,
        ff: &FourierFeatures,
        epoch: usize,
        step: usize,
    ) -> Vec<LabeledPixels> {
        let plan = self.plan(epoch, step);
        let n = cfg.train.pixels_per_image;
        let tag = |source: u64, slot: usize| {
            rng::derive_seed(self.seed, &[source, epoch as u64, step as u64, slot as u64])
        };
        let mut out = Vec::with_capacity(plan.pseudo.len() + plan.replay.len());
        for (slot, &i) in plan.pseudo.iter().enumerate() {
            out.push(augment_pixels(&pseudo[i], tag(0xB1, slot), &cfg.augment, ff, n));
        }
        for (slot, &i) in plan.replay.iter().enumerate() {
            out.push(augment_pixels(&buffer.samples()[i], tag(0xB2, slot), &cfg.augment, ff, n));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_split_is_six_and_two() {
        let cfg = AdaptConfig::default();
        assert_eq!(cfg.split(), (6, 2));
        assert_eq!(cfg.finetune().split(), (8, 0));
        let mut s = BatchSampler::new(40, 20, &cfg, 3).unwrap();
        for k in 0..100 {
            let p = s.plan(k / 7, k % 7);
            assert_eq!((p.pseudo.len(), p.replay.len()), (6, 2));
            assert!(p.replay.iter().all(|&i| i < 20));
        }
    }

    #[test]
    fn finetune_needs_no_buffer() {
        let cfg = AdaptConfig::default().finetune();
        let mut s = BatchSampler::new(10, 0, &cfg, 3).unwrap();
        assert!(s.plan(0, 0).replay.is_empty());
        assert_eq!(s.plan(0, 0).pseudo.len(), 8);
        assert!(BatchSampler::new(10, 0, &AdaptConfig::default(), 3).is_err());
        assert!(BatchSampler::new(0, 5, &AdaptConfig::default(), 3).is_err());
    }

    #[test]
    fn epoch_coverage() {
        let cfg = AdaptConfig::default();
        let mut s = BatchSampler::new(23, 5, &cfg, 8).unwrap();
        assert_eq!(s.steps_per_epoch(), 4);
        let mut seen = [0; 23];
        for step in 0..4 {
            for i in s.plan(2, step).pseudo {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c >= 1));
    }

    #[test]
    fn validation() {
        assert!(AdaptConfig::default().validate().is_ok());
        let bad = AdaptConfig {
            replay_ratio: (0, 1),
            ..AdaptConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = AdaptConfig {
            iterations: 0,
            ..AdaptConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
