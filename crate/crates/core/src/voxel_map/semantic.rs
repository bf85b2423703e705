use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ClassId;
use crate::math::log_sum_exp;

use super::{MapConfig, Voxel};

/// Symmetric ε-flip measurement model: an observation of class `k` has
/// likelihood `1 − ε` under `k` and `ε / (C − 1)` under every other class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelLikelihood {
    pub classes: usize,
    pub epsilon: f64,
    log_hit: f64,
    log_miss: f64,
}

impl LabelLikelihood {
    pub fn new(classes: usize, epsilon: f64) -> Self {
        Self {
            classes,
            epsilon,
            log_hit: libm::log(1.0 - epsilon),
            log_miss: libm::log(epsilon / (classes - 1) as f64),
        }
    }

    /// `log ℓ(observed | c)` for every class `c`.
    pub fn log_likelihood(&self, observed: ClassId) -> Vec<f64> {
        (0..self.classes)
            .map(|c| {
                if c == usize::from(observed) {
                    self.log_hit
                } else {
                    self.log_miss
                }
            })
            .collect()
    }

    /// Normalized log-posterior after the given per-class observation counts,
    /// starting from a uniform prior.
    pub fn log_posterior(&self, evidence: &[u32]) -> Vec<f64> {
        if self.epsilon == 0.0 {
            // Only classes consistent with every observation survive.
            let total: u64 = evidence.iter().map(|&n| u64::from(n)).sum();
            let survivors = evidence.iter().filter(|&&n| u64::from(n) == total).count();
            let lp = -libm::log(survivors as f64);
            return evidence
                .iter()
                .map(|&n| if u64::from(n) == total { lp } else { f64::NEG_INFINITY })
                .collect();
        }
        // Shifting every class by the same constant leaves the posterior
        // unchanged, so only the hit/miss gap matters.
        // Counts enter relative to the smallest one, so maps restored from
        // stored posteriors reproduce them exactly.
        let gap = self.log_hit - self.log_miss;
        let floor = evidence.iter().copied().min().unwrap_or(0);
        let scores: Vec<f64> = evidence.iter().map(|&n| f64::from(n - floor) * gap).collect();
        let norm = log_sum_exp(&scores);
        scores.into_iter().map(|s| s - norm).collect()
    }

    /// Log-posterior difference contributed by one extra observation of a class.
    pub fn evidence_gap(&self) -> f64 {
        self.log_hit - self.log_miss
    }

    pub fn max_probability(&self, evidence: &[u32]) -> f64 {
        let lp = self.log_posterior(evidence);
        libm::exp(lp.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }

    pub(crate) fn check_possible(&self, evidence: &[u32], class: ClassId) -> Result<()> {
        if self.epsilon == 0.0 {
            let total: u64 = evidence.iter().map(|&n| u64::from(n)).sum();
            if u64::from(evidence[usize::from(class)]) != total {
                return Err(Error::ImpossibleObservation);
            }
        }
        Ok(())
    }

    /// One recursive Bayes step on an arbitrary normalized log-posterior:
    /// `normalize(log_posterior + log ℓ(observed))`.
    pub fn recursive_step(&self, log_posterior: &[f64], observed: ClassId) -> Result<Vec<f64>> {
        if usize::from(observed) >= self.classes {
            return Err(Error::ClassOutOfRange {
                class: u32::from(observed),
                classes: self.classes,
            });
        }
        let scores: Vec<f64> = log_posterior
            .iter()
            .zip(self.log_likelihood(observed))
            .map(|(a, b)| a + b)
            .collect();
        let norm = log_sum_exp(&scores);
        if norm == f64::NEG_INFINITY {
            return Err(Error::ImpossibleObservation);
        }
        Ok(scores.into_iter().map(|s| s - norm).collect())
    }
}

pub(crate) fn tsdf_update(cfg: &MapConfig, tsdf: f64, weight: f64, sdf: f64, obs_weight: f64) -> (f64, f64) {
    let d = sdf.clamp(-cfg.truncation, cfg.truncation);
    let t = (weight * tsdf + obs_weight * d) / (weight + obs_weight);
    (t, (weight + obs_weight).min(cfg.max_weight))
}

/// Weighted running average of the truncated signed distance.
pub fn update_tsdf_voxel(cfg: &MapConfig, v: &Voxel, sdf: f64, obs_weight: f64) -> Result<Voxel> {
    if !(obs_weight > 0.0) {
        return Err(Error::InvalidConfig("observation weight must be positive"));
    }
    let (tsdf, weight) = tsdf_update(cfg, v.tsdf, v.weight, sdf, obs_weight);
    Ok(Voxel {
        tsdf,
        weight,
        evidence: v.evidence.clone(),
    })
}

/// Recursive Bayesian update of a voxel's class posterior with one observation.
pub fn update_semantic_voxel(lik: &LabelLikelihood, v: &Voxel, observed: ClassId) -> Result<Voxel> {
    if usize::from(observed) >= lik.classes || v.evidence.len() != lik.classes {
        return Err(Error::ClassOutOfRange {
            class: u32::from(observed),
            classes: lik.classes,
        });
    }
    lik.check_possible(&v.evidence, observed)?;
    let mut out = v.clone();
    out.evidence[usize::from(observed)] += 1;
    Ok(out)
}
