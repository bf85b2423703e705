use crate::error::Result;
use crate::segmenter::{train_epochs, ClassifierParams, Sample};

use super::{AdaptConfig, BatchSampler, ReplayBuffer};

/// Continues training `params` on pseudo-labelled samples mixed with replayed
/// pre-training samples. The loss of a step is the mean cross-entropy over
/// every labelled pixel of both parts; pseudo-label pixels marked
/// `UNDEFINED` are left out.
pub fn adapt(
    params: &ClassifierParams,
    pseudo: &[Sample],
    buffer: &ReplayBuffer,
    cfg: &AdaptConfig,
    seed: u64,
) -> Result<ClassifierParams> {
    cfg.validate()?;
    let mut sampler = BatchSampler::new(pseudo.len(), buffer.len(), cfg, seed)?;
    let spe = sampler.steps_per_epoch();
    let ff = params.featurizer().clone();
    let mut out = params.clone();
    train_epochs(&mut out, &cfg.train, spe, |epoch, step| {
        Ok(sampler.sample_batch(pseudo, buffer, cfg, &ff, epoch, step))
    })?;
    Ok(out)
}
