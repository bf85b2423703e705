use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use crate::camera::Pose;
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::rng;

use super::Scene;

/// Minimum distance between a camera center and any scene surface.
pub const MIN_SURFACE_CLEARANCE: f64 = 0.3;

/// Upper bound on the nominal arc length between consecutive poses.
const MAX_ARC_STEP: f64 = 0.11;
const MAX_SWEEP: f64 = 1.5 * PI;

/// Smooth orbit around the room center with low-frequency jitter, looking
/// towards a slowly wandering point in the scene interior.
pub fn sample_trajectory(scene: &Scene, n_frames: usize, seed: u64) -> Result<Vec<Pose>> {
    if n_frames == 0 {
        return Err(Error::InvalidConfig("trajectory needs at least one frame"));
    }
    let [ex, ey, ez] = scene.extent;
    let center = Vec3::new(ex / 2.0, ey / 2.0, 0.0);
    let up = Vec3::new(0.0, 0.0, 1.0);

    for attempt in 0..24u64 {
        let mut r = rng::stream(seed, &[0x7EA7, attempt]);
        let shrink = 1.0 - 0.03 * attempt as f64;
        let radius = (ex.min(ey) / 2.0 - 0.75) * shrink * rng::uniform(&mut r, 0.85, 1.0);
        let height = (ez * 0.58 + rng::uniform(&mut r, -0.1, 0.1)).min(ez - 0.5);
        if radius <= 0.05 || height <= MIN_SURFACE_CLEARANCE {
            continue;
        }
        let start = rng::uniform(&mut r, 0.0, TAU);
        let sweep = if n_frames > 1 {
            MAX_SWEEP.min(MAX_ARC_STEP / radius * (n_frames - 1) as f64)
        } else {
            0.0
        };
        let phases: [f64; 4] = core::array::from_fn(|_| rng::uniform(&mut r, 0.0, TAU));

        let mut poses = Vec::with_capacity(n_frames);
        for i in 0..n_frames {
            let s = if n_frames > 1 {
                i as f64 / (n_frames - 1) as f64
            } else {
                0.0
            };
            let angle = start + sweep * s;
            let rr = radius + 0.04 * libm::sin(TAU * s + phases[0]);
            let zz = height + 0.04 * libm::sin(TAU * 1.5 * s + phases[1]);
            let eye = center + Vec3::new(rr * libm::cos(angle), rr * libm::sin(angle), zz);
            let wander = Vec3::new(
                0.25 * libm::sin(TAU * s + phases[2]),
                0.25 * libm::sin(TAU * s + phases[3]),
                0.0,
            );
            // Look across the room, slightly past the center.
            let across = Vec3::new(-libm::cos(angle), -libm::sin(angle), 0.0) * (0.35 * radius);
            let target = center + across + wander + Vec3::new(0.0, 0.0, 0.45);
            match Pose::look_at(eye, target, up) {
                Some(p) => poses.push(p),
                None => break,
            }
        }
        if poses.len() == n_frames && poses.iter().all(|p| valid_center(scene, p.center())) {
            return Ok(poses);
        }
    }
    Err(Error::DegenerateScene)
}

fn valid_center(scene: &Scene, c: Vec3) -> bool {
    let inside = (0..3).all(|a| c[a] > 0.0 && c[a] < scene.extent[a]);
    inside && scene.clearance(c) >= MIN_SURFACE_CLEARANCE
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{build_scene, SceneSpec};

    fn scene(seed: u64) -> Scene {
        build_scene(&SceneSpec {
            seed,
            ..SceneSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn single_pose_is_valid() {
        let poses = sample_trajectory(&scene(1), 1, 3).unwrap();
        assert_eq!(poses.len(), 1);
        assert!(poses[0].rotation.orthonormality_error() < 1e-9);
        assert!((poses[0].rotation.determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hundred_poses_are_continuous_and_clear() {
        let s = scene(2);
        let poses = sample_trajectory(&s, 100, 5).unwrap();
        for pair in poses.windows(2) {
            let d = (pair[1].center() - pair[0].center()).norm();
            assert!(d <= 0.15, "step {d}");
        }
        for p in &poses {
            assert!(s.clearance(p.center()) >= MIN_SURFACE_CLEARANCE);
            p.validate().unwrap();
            // Optical axis points down into the room.
            assert!(p.rotate(Vec3::new(0.0, 0.0, 1.0)).z < 0.0);
        }
    }

    #[test]
    fn trajectory_is_deterministic() {
        let s = scene(3);
        assert_eq!(sample_trajectory(&s, 20, 8).unwrap(), sample_trajectory(&s, 20, 8).unwrap());
        assert_ne!(sample_trajectory(&s, 20, 8).unwrap(), sample_trajectory(&s, 20, 9).unwrap());
    }

    #[test]
    fn tiny_room_is_degenerate() {
        let s = build_scene(&SceneSpec {
            extent: [0.8, 0.8, 0.5],
            num_objects: 0,
            ..SceneSpec::default()
        })
        .unwrap();
        assert_eq!(sample_trajectory(&s, 5, 1), Err(Error::DegenerateScene));
    }
}
