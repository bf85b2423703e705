//! Deterministic synthetic indoor world.
//!
//! Scenes are rooms built from axis-aligned boxes (the room shell plus
//! free-standing objects). Frames are rendered analytically, and the labels of
//! an imperfect pre-trained network are simulated by a view-dependent
//! corruption model.

mod noise;
mod render;
mod trajectory;

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ClassId;
use crate::math::{Aabb, Vec3};
use crate::rng;

pub use noise::{corrupt_labels, corrupt_prediction, incidence_cosines, NoiseModel};
pub use render::{render_frame, Frame, MAX_DEPTH, MIN_DEPTH};
pub use trajectory::{sample_trajectory, MIN_SURFACE_CLEARANCE};

pub const FLOOR_CLASS: ClassId = 0;
pub const WALL_CLASS: ClassId = 1;

/// Thickness of the floor slab and wall boxes, outside the room extent.
pub const WALL_THICKNESS: f64 = 0.1;

/// Albedo of the first eight classes before per-scene jitter.
const BASE_PALETTE: [[f64; 3]; 8] = [
    [0.55, 0.40, 0.25],
    [0.80, 0.78, 0.70],
    [0.20, 0.35, 0.70],
    [0.70, 0.20, 0.20],
    [0.25, 0.60, 0.30],
    [0.85, 0.75, 0.20],
    [0.45, 0.25, 0.55],
    [0.30, 0.30, 0.30],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    /// Room interior size in meters; the floor is at `z = 0`.
    pub extent: [f64; 3],
    pub num_objects: usize,
    pub class_count: usize,
    /// Object edge lengths are drawn from `[min, max]` meters.
    pub object_size: (f64, f64),
    /// Standard deviation of the per-scene albedo offset of every class.
    pub albedo_jitter: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            extent: [3.6, 3.6, 2.6],
            num_objects: 6,
            class_count: 8,
            object_size: (0.3, 0.9),
            albedo_jitter: 0.03,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.extent.iter().all(|&e| e > 0.0 && e.is_finite()) {
            return Err(Error::InvalidSpec("extent must be positive in all axes"));
        }
        if self.class_count < 2 || self.class_count > usize::from(crate::UNDEFINED) {
            return Err(Error::InvalidSpec("class count must be in 2..=255"));
        }
        let (lo, hi) = self.object_size;
        if self.num_objects > 0 {
            if self.class_count < 3 {
                return Err(Error::InvalidSpec("objects need a class id >= 2"));
            }
            if !(lo > 0.0 && lo <= hi) {
                return Err(Error::InvalidSpec("object size range must satisfy 0 < min <= max"));
            }
            if self.extent.iter().any(|&e| hi > e) {
                return Err(Error::InvalidSpec("objects cannot fit inside the extent"));
            }
        }
        if !(self.albedo_jitter >= 0.0) {
            return Err(Error::InvalidSpec("albedo jitter must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledBox {
    pub bounds: Aabb,
    pub class: ClassId,
}

/// Surface appearance used to synthesize the feature image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Appearance {
    pub albedo: Vec<[f64; 3]>,
    /// Unit vector pointing towards the light.
    pub light_dir: Vec3,
    pub ambient: f64,
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub seed: u64,
    pub extent: [f64; 3],
    pub class_count: usize,
    pub boxes: Vec<LabeledBox>,
    pub appearance: Appearance,
}

impl Scene {
    pub fn extent_box(&self) -> Aabb {
        Aabb::new(Vec3::ZERO, Vec3::from_array(self.extent))
    }

    /// Distance from `p` to the nearest box surface (0 if inside a box).
    pub fn clearance(&self, p: Vec3) -> f64 {
        self.boxes
            .iter()
            .map(|b| b.bounds.distance(p))
            .fold(f64::INFINITY, f64::min)
    }
}

fn class_albedo(class: usize) -> [f64; 3] {
    if let Some(c) = BASE_PALETTE.get(class) {
        return *c;
    }
    let mut r = rng::stream(0x00A1_BED0, &[class as u64]);
    [r.random::<f64>(), r.random::<f64>(), r.random::<f64>()].map(|v| 0.15 + 0.7 * v)
}

/// Room (floor + four walls) with `num_objects` boxes resting on the floor.
pub fn build_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let [ex, ey, ez] = spec.extent;
    let t = WALL_THICKNESS;
    let mut r = rng::stream(spec.seed, &[0x5CE7E]);

    let mut boxes = alloc::vec![
        LabeledBox {
            bounds: Aabb::new(Vec3::new(-t, -t, -t), Vec3::new(ex + t, ey + t, 0.0)),
            class: FLOOR_CLASS,
        },
        LabeledBox {
            bounds: Aabb::new(Vec3::new(-t, 0.0, 0.0), Vec3::new(0.0, ey, ez)),
            class: WALL_CLASS,
        },
        LabeledBox {
            bounds: Aabb::new(Vec3::new(ex, 0.0, 0.0), Vec3::new(ex + t, ey, ez)),
            class: WALL_CLASS,
        },
        LabeledBox {
            bounds: Aabb::new(Vec3::new(-t, -t, 0.0), Vec3::new(ex + t, 0.0, ez)),
            class: WALL_CLASS,
        },
        LabeledBox {
            bounds: Aabb::new(Vec3::new(-t, ey, 0.0), Vec3::new(ex + t, ey + t, ez)),
            class: WALL_CLASS,
        },
    ];

    let (lo, hi) = spec.object_size;
    let object_classes = spec.class_count.saturating_sub(2);
    for _ in 0..spec.num_objects {
        let size = Vec3::new(
            rng::uniform(&mut r, lo, hi),
            rng::uniform(&mut r, lo, hi),
            rng::uniform(&mut r, lo, hi),
        );
        let min = Vec3::new(
            rng::uniform(&mut r, 0.0, ex - size.x),
            rng::uniform(&mut r, 0.0, ey - size.y),
            0.0,
        );
        let class = 2 + r.random_range(0..object_classes);
        boxes.push(LabeledBox {
            bounds: Aabb::new(min, min + size),
            class: class as ClassId,
        });
    }

    let albedo = (0..spec.class_count)
        .map(|c| {
            let base = class_albedo(c);
            base.map(|v| {
                (v + spec.albedo_jitter * rng::standard_normal(&mut r)).clamp(0.02, 0.98)
            })
        })
        .collect();
    let tilt = rng::uniform(&mut r, 0.2, 0.6);
    let azimuth = rng::uniform(&mut r, 0.0, core::f64::consts::TAU);
    let light_dir = Vec3::new(
        libm::sin(tilt) * libm::cos(azimuth),
        libm::sin(tilt) * libm::sin(azimuth),
        libm::cos(tilt),
    );

    Ok(Scene {
        seed: spec.seed,
        extent: spec.extent,
        class_count: spec.class_count,
        boxes,
        appearance: Appearance {
            albedo,
            light_dir,
            ambient: 0.45,
            noise_sigma: 0.05,
        },
    })
}
