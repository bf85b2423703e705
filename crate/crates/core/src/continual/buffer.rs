use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;
use crate::segmenter::Sample;

/// Fixed subset of the pre-training data replayed during adaptation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayBuffer {
    samples: Vec<Sample>,
}

impl ReplayBuffer {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_samples(samples: Vec<Sample>) -> Self {
        Self { samples }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Number of samples kept for a dataset of `n`: `round(fraction · n)`, at least one.
pub(crate) fn buffer_size(n: usize, fraction: f64) -> usize {
    (libm::round(fraction * n as f64) as usize).clamp(1, n)
}

/// Uniform draw without replacement of `round(fraction · |dataset|)` samples.
pub fn build_buffer(dataset: &[Sample], fraction: f64, seed: u64) -> Result<ReplayBuffer> {
    if dataset.is_empty() {
        return Err(Error::EmptySource("pre-training dataset is empty"));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidConfig("buffer fraction must be in (0, 1]"));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng::stream(seed, &[0xBF]));
    order.truncate(buffer_size(dataset.len(), fraction));
    Ok(ReplayBuffer {
        samples: order.into_iter().map(|i| dataset[i].clone()).collect(),
    })
}
