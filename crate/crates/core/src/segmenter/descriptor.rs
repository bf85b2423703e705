use libm::sin;

use crate::error::Result;
use crate::image::{is_valid_depth, DepthImage, FeatureImage, Image};
use crate::rng;
use crate::scene::Frame;

/// Feature channels, inverse depth and pixel coordinates.
pub const BASE_DIM: usize = 6;
pub const FOURIER_DIM: usize = 8;
pub const DESCRIPTOR_DIM: usize = BASE_DIM + FOURIER_DIM;

const FOURIER_SCALE: f64 = 2.0;
const MAX_INV_DEPTH: f64 = 3.0;

pub type Descriptor = [f64; DESCRIPTOR_DIM];
pub type DescriptorImage = Image<Descriptor>;

/// Frozen random projections `sin(w·x + b)` of the base channels.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierFeatures {
    seed: u64,
    weights: [[f64; BASE_DIM]; FOURIER_DIM],
    phases: [f64; FOURIER_DIM],
}

impl FourierFeatures {
    pub fn from_seed(seed: u64) -> Self {
        let mut r = rng::stream(seed, &[0xF0F0]);
        let mut weights = [[0.0; BASE_DIM]; FOURIER_DIM];
        let mut phases = [0.0; FOURIER_DIM];
        for k in 0..FOURIER_DIM {
            for w in weights[k].iter_mut() {
                *w = FOURIER_SCALE * rng::standard_normal(&mut r);
            }
            phases[k] = rng::uniform(&mut r, 0.0, core::f64::consts::TAU);
        }
        Self {
            seed,
            weights,
            phases,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Descriptor of pixel `(u, v)` of a `width`×`height` image.
pub fn descriptor_at(
    feature: [f64; 3],
    depth: f64,
    u: usize,
    v: usize,
    width: usize,
    height: usize,
    ff: &FourierFeatures,
) -> Descriptor {
    let inv_depth = if is_valid_depth(depth) {
        (0.5 / depth).min(MAX_INV_DEPTH)
    } else {
        0.0
    };
    let base = [
        2.0 * feature[0] - 1.0,
        2.0 * feature[1] - 1.0,
        2.0 * feature[2] - 1.0,
        inv_depth,
        2.0 * (u as f64 + 0.5) / width as f64 - 1.0,
        2.0 * (v as f64 + 0.5) / height as f64 - 1.0,
    ];
    let mut d = [0.0; DESCRIPTOR_DIM];
    d[..BASE_DIM].copy_from_slice(&base);
    for k in 0..FOURIER_DIM {
        let mut s = ff.phases[k];
        for (w, b) in ff.weights[k].iter().zip(&base) {
            s += w * b;
        }
        d[BASE_DIM + k] = sin(s);
    }
    d
}

pub fn featurize(
    features: &FeatureImage,
    depth: &DepthImage,
    ff: &FourierFeatures,
) -> Result<DescriptorImage> {
    depth.ensure_dims(features.dims())?;
    let (w, h) = features.dims();
    Ok(Image::from_fn(w, h, |u, v| {
        descriptor_at(*features.get(u, v), *depth.get(u, v), u, v, w, h, ff)
    }))
}

pub fn featurize_frame(frame: &Frame, ff: &FourierFeatures) -> Result<DescriptorImage> {
    featurize(&frame.features, &frame.depth, ff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::INVALID_DEPTH;

    #[test]
    fn invalid_depth_gives_zero_channel() {
        let f = Image::filled(5, 3, [0.3, 0.6, 0.9]);
        let d = Image::filled(5, 3, INVALID_DEPTH);
        let out = featurize(&f, &d, &FourierFeatures::from_seed(1)).unwrap();
        assert!(out.as_slice().iter().all(|x| x[3] == 0.0));
    }

    #[test]
    fn deterministic_and_bounded() {
        let f = Image::from_fn(7, 4, |u, v| [u as f64 / 7.0, v as f64 / 4.0, 0.5]);
        let d = Image::from_fn(7, 4, |u, _| 0.1 + u as f64 * 0.8);
        let a = featurize(&f, &d, &FourierFeatures::from_seed(9)).unwrap();
        let b = featurize(&f, &d, &FourierFeatures::from_seed(9)).unwrap();
        assert_eq!(a, b);
        let c = featurize(&f, &d, &FourierFeatures::from_seed(10)).unwrap();
        assert_ne!(a, c);
        assert!(a.as_slice().iter().flatten().all(|x| x.abs() <= 3.0));
        // Near depth saturates.
        assert_eq!(a.get(0, 0)[3], 3.0);
    }
}
