use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Images per step.
    pub batch_size: usize,
    pub lr_start: f64,
    pub lr_peak: f64,
    pub lr_end: f64,
    pub warmup_epochs: usize,
    /// Pixels drawn from each augmented image per step.
    pub pixels_per_image: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 8,
            lr_start: 1e-6,
            lr_peak: 0.05,
            lr_end: 1e-3,
            warmup_epochs: 5,
            pixels_per_image: 512,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.pixels_per_image == 0 {
            return Err(Error::InvalidConfig("epochs, batch size and pixels per image must be positive"));
        }
        if !(self.lr_start > 0.0 && self.lr_start <= self.lr_peak && self.lr_peak.is_finite()) {
            return Err(Error::InvalidConfig("need 0 < lr_start <= lr_peak"));
        }
        if !(self.lr_end > 0.0 && self.lr_end.is_finite()) {
            return Err(Error::InvalidConfig("lr_end must be positive"));
        }
        if self.warmup_epochs >= self.epochs {
            return Err(Error::InvalidConfig("warmup must be shorter than training"));
        }
        Ok(())
    }
}

/// Learning rate at global `step`: linear from `lr_start` to `lr_peak` over
/// the warmup epochs (the peak is reached on the first step after warmup),
/// then cosine down to `lr_end` on the last step of the last epoch.
pub fn one_cycle_lr(step: usize, steps_per_epoch: usize, cfg: &TrainConfig) -> f64 {
    let spe = steps_per_epoch.max(1);
    let warm = cfg.warmup_epochs * spe;
    let last = (cfg.epochs * spe).saturating_sub(1);
    if step <= warm {
        if warm == 0 {
            return cfg.lr_peak;
        }
        return cfg.lr_start + (cfg.lr_peak - cfg.lr_start) * step as f64 / warm as f64;
    }
    if step >= last {
        return cfg.lr_end;
    }
    let t = (step - warm) as f64 / (last - warm) as f64;
    cfg.lr_end + (cfg.lr_peak - cfg.lr_end) * 0.5 * (1.0 + libm::cos(core::f64::consts::PI * t))
}

/// `θ ← θ − lr·grad`. On error `theta` is left untouched.
pub fn sgd_step(theta: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
    if theta.len() != grad.len() {
        return Err(Error::DimensionMismatch {
            expected: (theta.len(), 1),
            actual: (grad.len(), 1),
        });
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::InvalidConfig("learning rate must be positive"));
    }
    if grad.iter().zip(theta.iter()).any(|(g, t)| !(t - lr * g).is_finite()) {
        return Err(Error::Divergence);
    }
    for (t, g) in theta.iter_mut().zip(grad) {
        *t -= lr * g;
    }
    Ok(())
}
