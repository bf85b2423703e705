use alloc::vec::Vec;

use crate::camera::{Intrinsics, Pose};
use crate::image::{DepthImage, FeatureImage, Image, LabelImage, INVALID_DEPTH, UNDEFINED};
use crate::math::Vec3;
use crate::rng;

use super::Scene;

/// Sensor range limit in meters; farther hits are reported as invalid.
pub const MAX_DEPTH: f64 = 5.45;
/// Nearest valid depth in meters.
pub const MIN_DEPTH: f64 = 0.1;

/// One RGB-D observation with ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: usize,
    /// Proxy for RGB in `[0, 1]`.
    pub features: FeatureImage,
    /// z-depth in meters, [`INVALID_DEPTH`] where there is no measurement.
    pub depth: DepthImage,
    pub gt_labels: LabelImage,
    pub pose: Pose,
    pub intrinsics: Intrinsics,
}

impl Frame {
    /// Rounds depth to millimeters and features to 8 bits, matching what the
    /// on-disk formats can represent.
    pub fn quantized(&self) -> Frame {
        let mut out = self.clone();
        for d in out.depth.as_mut_slice() {
            let mm = libm::round(*d * 1000.0).clamp(0.0, 65535.0);
            *d = mm / 1000.0;
        }
        for f in out.features.as_mut_slice() {
            *f = f.map(|v| libm::round(v.clamp(0.0, 1.0) * 255.0) / 255.0);
        }
        out
    }
}

/// Nearest box hit along `origin + t·dir`: `(t, box index)`. Ties go to the
/// box with the lowest class id.
pub(crate) fn nearest_box_hit(scene: &Scene, origin: Vec3, dir: Vec3) -> Option<(f64, usize, usize)> {
    let mut best: Option<(f64, usize, usize)> = None;
    for (i, b) in scene.boxes.iter().enumerate() {
        if let Some((t, axis)) = b.bounds.ray_entry(origin, dir) {
            let better = match best {
                None => true,
                Some((bt, bi, _)) => t < bt || (t == bt && b.class < scene.boxes[bi].class),
            };
            if better {
                best = Some((t, i, axis));
            }
        }
    }
    best
}

/// Renders depth, ground-truth labels and shaded features for one pose.
///
/// `index` keys the per-frame feature noise.
pub fn render_frame(scene: &Scene, pose: &Pose, intr: &Intrinsics, index: usize) -> Frame {
    let (w, h) = intr.dims();
    let mut depth = Vec::with_capacity(w * h);
    let mut labels = Vec::with_capacity(w * h);
    let mut features = Vec::with_capacity(w * h);
    let app = &scene.appearance;
    let mut noise = rng::stream(scene.seed, &[0xFEA7, index as u64]);

    for v in 0..h {
        for u in 0..w {
            let dir = pose.rotate(intr.pixel_ray(u, v));
            let hit = nearest_box_hit(scene, pose.translation, dir)
                .filter(|&(t, _, _)| t > MIN_DEPTH && t <= MAX_DEPTH);
            let base = match hit {
                Some((t, bi, axis)) => {
                    let b = &scene.boxes[bi];
                    depth.push(t);
                    labels.push(b.class);
                    let mut n = Vec3::ZERO;
                    let s = if dir[axis] > 0.0 { -1.0 } else { 1.0 };
                    match axis {
                        0 => n.x = s,
                        1 => n.y = s,
                        _ => n.z = s,
                    }
                    let shade = app.ambient + (1.0 - app.ambient) * n.dot(app.light_dir).max(0.0);
                    app.albedo[usize::from(b.class)].map(|a| a * shade)
                }
                None => {
                    depth.push(INVALID_DEPTH);
                    labels.push(UNDEFINED);
                    [0.0; 3]
                }
            };
            let mut f = [0.0; 3];
            for (o, b) in f.iter_mut().zip(base) {
                *o = (b + app.noise_sigma * rng::standard_normal(&mut noise)).clamp(0.0, 1.0);
            }
            features.push(f);
        }
    }

    Frame {
        index,
        features: Image::from_vec(w, h, features).expect("sized by construction"),
        depth: Image::from_vec(w, h, depth).expect("sized by construction"),
        gt_labels: Image::from_vec(w, h, labels).expect("sized by construction"),
        pose: *pose,
        intrinsics: *intr,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{Aabb, Mat3};
    use crate::scene::{build_scene, LabeledBox, SceneSpec, WALL_CLASS};

    fn empty_room() -> Scene {
        build_scene(&SceneSpec {
            seed: 4,
            num_objects: 0,
            ..SceneSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn perpendicular_wall_depth_is_exact() {
        let scene = empty_room();
        // Looking along +x from x = 1.6 towards the wall at x = 3.6.
        let eye = Vec3::new(1.6, 1.8, 1.3);
        let pose = Pose::look_at(eye, eye + Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0))
            .unwrap();
        let intr = Intrinsics::with_size(16, 8);
        let frame = render_frame(&scene, &pose, &intr, 0);
        for v in 0..8 {
            for u in 0..16 {
                assert!((frame.depth.get(u, v) - 2.0).abs() < 1e-6);
                assert_eq!(*frame.gt_labels.get(u, v), WALL_CLASS);
            }
        }
    }

    #[test]
    fn open_ceiling_is_invalid() {
        let scene = empty_room();
        // Identity rotation points the optical axis along world +z.
        let pose = Pose::new(Mat3::IDENTITY, Vec3::new(1.8, 1.8, 1.3));
        let frame = render_frame(&scene, &pose, &Intrinsics::with_size(8, 4), 0);
        assert!(frame.depth.as_slice().iter().all(|&d| d == INVALID_DEPTH));
        assert!(frame.gt_labels.as_slice().iter().all(|&l| l == UNDEFINED));
    }

    #[test]
    fn coincident_faces_resolve_to_lowest_class() {
        let mut scene = empty_room();
        let face = Aabb::new(Vec3::new(2.0, 1.0, 0.0), Vec3::new(2.5, 2.5, 1.5));
        scene.boxes.push(LabeledBox { bounds: face, class: 5 });
        scene.boxes.push(LabeledBox { bounds: face, class: 3 });
        let eye = Vec3::new(1.0, 1.8, 0.8);
        let pose = Pose::look_at(eye, eye + Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0))
            .unwrap();
        let frame = render_frame(&scene, &pose, &Intrinsics::with_size(4, 2), 0);
        assert_eq!(*frame.gt_labels.get(2, 1), 3);
    }
}
