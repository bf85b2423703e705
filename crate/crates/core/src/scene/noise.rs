use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::camera::Intrinsics;
use crate::error::{Error, Result};
use crate::image::{is_valid_depth, ClassId, DepthImage, Image, LabelImage, UNDEFINED};
use crate::math::Vec3;
use crate::rng;

use super::Frame;

/// Flip probabilities are clamped to this value.
const MAX_FLIP_PROB: f64 = 0.95;

/// View-dependent label corruption standing in for a pre-trained network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub base_flip_prob: f64,
    /// Added flip probability per meter of depth.
    pub distance_coeff: f64,
    /// Added flip probability at grazing incidence (`|cos θ| = 0`).
    pub grazing_coeff: f64,
    /// Expected number of wrong-class disks per frame.
    pub blob_rate: f64,
    /// Maximum disk radius in pixels.
    pub blob_radius: f64,
    /// Row-stochastic: `confusion[true][replacement]`.
    pub confusion: Vec<Vec<f64>>,
    pub seed: u64,
}

impl NoiseModel {
    /// Uniform off-diagonal confusion over `classes`, no noise terms.
    pub fn noiseless(classes: usize, seed: u64) -> Self {
        Self {
            base_flip_prob: 0.0,
            distance_coeff: 0.0,
            grazing_coeff: 0.0,
            blob_rate: 0.0,
            blob_radius: 0.0,
            confusion: uniform_confusion(classes),
            seed,
        }
    }

    /// Benchmark calibration.
    pub fn benchmark(classes: usize, seed: u64) -> Self {
        Self {
            base_flip_prob: 0.12,
            distance_coeff: 0.05,
            grazing_coeff: 0.25,
            blob_rate: 2.0,
            blob_radius: 14.0,
            confusion: uniform_confusion(classes),
            seed,
        }
    }

    pub fn classes(&self) -> usize {
        self.confusion.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.base_flip_prob) {
            return Err(Error::InvalidConfig("base flip probability must be in [0, 1)"));
        }
        if !(self.blob_rate >= 0.0 && self.blob_radius >= 0.0) {
            return Err(Error::InvalidConfig("blob rate and radius must be non-negative"));
        }
        let c = self.confusion.len();
        if c < 2 {
            return Err(Error::InvalidConfig("confusion matrix needs at least two classes"));
        }
        for row in &self.confusion {
            if row.len() != c || row.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::InvalidConfig("confusion matrix must be square and non-negative"));
            }
            if (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidConfig("confusion rows must sum to 1"));
            }
        }
        Ok(())
    }

    /// Per-pixel flip probability for a given depth and incidence cosine.
    pub fn flip_probability(&self, depth: f64, cos_incidence: f64) -> f64 {
        let p = self.base_flip_prob
            + self.distance_coeff * depth
            + self.grazing_coeff * (1.0 - cos_incidence.abs());
        p.clamp(0.0, MAX_FLIP_PROB)
    }
}

fn uniform_confusion(classes: usize) -> Vec<Vec<f64>> {
    (0..classes)
        .map(|i| {
            (0..classes)
                .map(|j| if i == j { 0.0 } else { 1.0 / (classes - 1) as f64 })
                .collect()
        })
        .collect()
}

/// `|cos|` of the angle between each pixel ray and the surface normal
/// estimated from neighboring depths. Pixels without a usable neighbor in
/// either image direction get 1.
pub fn incidence_cosines(depth: &DepthImage, intr: &Intrinsics) -> Image<f64> {
    let (w, h) = depth.dims();
    let point = |u: usize, v: usize| -> Option<Vec3> {
        let d = *depth.get(u, v);
        is_valid_depth(d).then(|| intr.pixel_ray(u, v) * d)
    };
    // Tangent towards whichever valid neighbor has the smaller depth jump.
    let tangent = |p: Vec3, d: f64, a: Option<(usize, usize)>, b: Option<(usize, usize)>| {
        let mut best: Option<(f64, Vec3)> = None;
        for (u, v) in [a, b].into_iter().flatten() {
            if let Some(q) = point(u, v) {
                let jump = (depth.get(u, v) - d).abs();
                if best.is_none_or(|(j, _)| jump < j) {
                    best = Some((jump, q - p));
                }
            }
        }
        best.map(|(_, t)| t)
    };
    Image::from_fn(w, h, |u, v| {
        let Some(p) = point(u, v) else {
            return 1.0;
        };
        let d = *depth.get(u, v);
        let left = u.checked_sub(1).map(|x| (x, v));
        let right = (u + 1 < w).then_some((u + 1, v));
        let upper = v.checked_sub(1).map(|y| (u, y));
        let lower = (v + 1 < h).then_some((u, v + 1));
        match (tangent(p, d, left, right), tangent(p, d, upper, lower)) {
            (Some(tx), Some(ty)) => {
                let n = tx.cross(ty);
                let nn = n.norm();
                if nn == 0.0 {
                    1.0
                } else {
                    (n.dot(p) / (nn * p.norm())).abs()
                }
            }
            _ => 1.0,
        }
    })
}

/// Simulated pre-trained-network labels for a rendered frame: its ground
/// truth passed through [`corrupt_prediction`].
pub fn corrupt_labels(frame: &Frame, nm: &NoiseModel) -> Result<LabelImage> {
    corrupt_prediction(&frame.gt_labels, &frame.depth, &frame.intrinsics, frame.index, nm)
}

/// Applies per-pixel flips and wrong-class disks to `labels`.
///
/// Each defined pixel flips with probability
/// `clamp(base + distance_coeff·depth + grazing_coeff·(1 − |cos θ|), 0, 0.95)`;
/// a flipped pixel takes a class drawn from the confusion row of its input
/// class. Afterwards `blob_rate` disks (fractional part drawn as a
/// Bernoulli) are stamped with one wrong class each. Undefined pixels stay
/// undefined. Draws are keyed by `(nm.seed, frame_index)`.
pub fn corrupt_prediction(
    labels: &LabelImage,
    depth: &DepthImage,
    intr: &Intrinsics,
    frame_index: usize,
    nm: &NoiseModel,
) -> Result<LabelImage> {
    nm.validate()?;
    labels.ensure_dims(intr.dims())?;
    depth.ensure_dims(intr.dims())?;
    let classes = nm.classes();
    if let Some(&bad) = labels
        .as_slice()
        .iter()
        .find(|&&l| l != UNDEFINED && usize::from(l) >= classes)
    {
        return Err(Error::ClassOutOfRange {
            class: u32::from(bad),
            classes,
        });
    }

    let (w, h) = labels.dims();
    let cosines = incidence_cosines(depth, intr);
    let mut r = rng::stream(nm.seed, &[0xC0FF, frame_index as u64]);
    let mut out = labels.clone();

    for i in 0..w * h {
        let l = labels.as_slice()[i];
        if l == UNDEFINED {
            continue;
        }
        let d = depth.as_slice()[i];
        let d = if is_valid_depth(d) { d } else { 0.0 };
        let p = nm.flip_probability(d, cosines.as_slice()[i]);
        if r.random::<f64>() < p {
            out.as_mut_slice()[i] = rng::categorical(&mut r, &nm.confusion[usize::from(l)]) as ClassId;
        }
    }

    let whole = libm::floor(nm.blob_rate);
    let extra = usize::from(r.random::<f64>() < nm.blob_rate - whole);
    let blobs = whole as usize + extra;
    let uniform_other = vec![1.0; classes];
    for _ in 0..blobs {
        let cx = r.random_range(0..w);
        let cy = r.random_range(0..h);
        let radius = nm.blob_radius * rng::uniform(&mut r, 0.5, 1.0);
        let center = *labels.get(cx, cy);
        let class = if center == UNDEFINED {
            rng::categorical(&mut r, &uniform_other)
        } else {
            rng::categorical(&mut r, &nm.confusion[usize::from(center)])
        } as ClassId;
        let r2 = radius * radius;
        let reach = libm::ceil(radius) as usize;
        for y in cy.saturating_sub(reach)..(cy + reach + 1).min(h) {
            for x in cx.saturating_sub(reach)..(cx + reach + 1).min(w) {
                let dx = x as f64 - cx as f64;
                let dy = y as f64 - cy as f64;
                if dx * dx + dy * dy <= r2 && *labels.get(x, y) != UNDEFINED {
                    *out.get_mut(x, y) = class;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{build_scene, render_frame, sample_trajectory, SceneSpec};

    fn frame() -> Frame {
        let scene = build_scene(&SceneSpec {
            seed: 11,
            ..SceneSpec::default()
        })
        .unwrap();
        let pose = sample_trajectory(&scene, 1, 2).unwrap()[0];
        render_frame(&scene, &pose, &Intrinsics::default(), 7)
    }

    #[test]
    fn zero_noise_is_identity() {
        let f = frame();
        let out = corrupt_labels(&f, &NoiseModel::noiseless(8, 1)).unwrap();
        assert_eq!(out, f.gt_labels);
    }

    #[test]
    fn corruption_is_deterministic_and_in_range() {
        let f = frame();
        let nm = NoiseModel::benchmark(8, 3);
        let a = corrupt_labels(&f, &nm).unwrap();
        assert_eq!(a, corrupt_labels(&f, &nm).unwrap());
        for (o, g) in a.as_slice().iter().zip(f.gt_labels.as_slice()) {
            assert_eq!(*o == UNDEFINED, *g == UNDEFINED);
            assert!(*o == UNDEFINED || *o < 8);
        }
        let other = corrupt_labels(&f, &NoiseModel { seed: 4, ..nm }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn clamped_flip_rate_matches_monte_carlo() {
        // 100×100 defined pixels, flat depth 1 m facing the camera.
        let intr = Intrinsics::with_size(100, 100);
        let labels = Image::filled(100, 100, 2u8);
        let depth = Image::filled(100, 100, 1.0);
        let nm = NoiseModel {
            base_flip_prob: 0.95,
            ..NoiseModel::noiseless(8, 17)
        };
        let out = corrupt_prediction(&labels, &depth, &intr, 0, &nm).unwrap();
        let flipped = out.as_slice().iter().filter(|&&l| l != 2).count();
        let rate = flipped as f64 / 1e4;
        assert!((rate - 0.95).abs() <= 0.02, "rate {rate}");
    }

    #[test]
    fn incidence_of_tilted_plane() {
        // Plane z = 2 seen head-on gives |cos| = 1 at the principal point.
        let intr = Intrinsics::with_size(9, 9);
        let depth = Image::from_fn(9, 9, |_, _| 2.0);
        let cos = incidence_cosines(&depth, &intr);
        let ray = intr.pixel_ray(4, 4).normalized();
        assert!((cos.get(4, 4) - ray.z).abs() < 1e-12);
        // Plane x + z = 2 (tilted 45°): depth d satisfies d·(rx + 1) = 2.
        let depth = Image::from_fn(9, 9, |u, v| {
            let r = intr.pixel_ray(u, v);
            2.0 / (r.x + 1.0)
        });
        let cos = incidence_cosines(&depth, &intr);
        let n = Vec3::new(1.0, 0.0, 1.0).normalized();
        for (u, v) in [(4, 4), (2, 7)] {
            let ray = intr.pixel_ray(u, v).normalized();
            assert!((cos.get(u, v) - n.dot(ray).abs()).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_confusion() {
        let mut nm = NoiseModel::noiseless(3, 0);
        nm.confusion[1][0] = 0.7;
        assert!(nm.validate().is_err());
    }
}
