use alloc::vec::Vec;

use crate::camera::{Intrinsics, Pose};
use crate::error::{Error, Result};
use crate::image::{is_valid_depth, DepthImage, LabelImage, UNDEFINED};
use crate::math::Vec3;

use super::{SemanticVoxelMap, VoxelIndex};

/// Constant weight of one projective TSDF observation.
const OBSERVATION_WEIGHT: f64 = 1.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    /// Voxels whose TSDF was updated.
    pub tsdf_updates: usize,
    /// Voxels that also received a semantic observation.
    pub semantic_updates: usize,
}

/// Integrates one depth image and its label image into the map.
///
/// Every valid pixel's ray is traversed through the band
/// `[surface − δ, surface + δ]` and the touched voxels are collected. Each
/// touched voxel then gets one projective update per frame: it is projected
/// into the image, `sdf = depth(pixel) − z_voxel`, voxels more than δ behind
/// the surface are skipped, the TSDF is averaged with `clamp(sdf, ±δ)`, and
/// when `|sdf| ≤ δ` and the pixel has a label the class posterior is updated.
pub fn integrate_frame(
    map: &mut SemanticVoxelMap,
    depth: &DepthImage,
    labels: &LabelImage,
    pose: &Pose,
    intr: &Intrinsics,
) -> Result<IntegrationStats> {
    depth.ensure_dims(intr.dims())?;
    labels.ensure_dims(intr.dims())?;
    let classes = map.config().class_count;
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

    let cfg = *map.config();
    let delta = cfg.truncation;
    let mut touched: Vec<VoxelIndex> = Vec::new();
    for v in 0..intr.height {
        for u in 0..intr.width {
            let d = *depth.get(u, v);
            if !is_valid_depth(d) {
                continue;
            }
            let ray = intr.pixel_ray(u, v);
            let scale = ray.norm();
            let dir = pose.rotate(ray * (1.0 / scale));
            let range = d * scale;
            let start = pose.translation + dir * (range - delta).max(0.0);
            let end = pose.translation + dir * (range + delta);
            traverse_voxels(start, end, cfg.voxel_size, &mut touched);
        }
    }
    touched.sort_unstable();
    touched.dedup();

    let mut stats = IntegrationStats::default();
    for idx in touched {
        let p_cam = pose.to_camera(cfg.voxel_center(idx));
        let Some((u, v)) = intr.project(p_cam) else {
            continue;
        };
        let d = *depth.get(u, v);
        if !is_valid_depth(d) {
            continue;
        }
        let sdf = d - p_cam.z;
        if sdf < -delta {
            continue;
        }
        map.update_tsdf(idx, sdf, OBSERVATION_WEIGHT);
        stats.tsdf_updates += 1;
        let label = *labels.get(u, v);
        if sdf.abs() <= delta && label != UNDEFINED {
            map.observe(idx, label)?;
            stats.semantic_updates += 1;
        }
    }
    Ok(stats)
}

/// Appends every voxel crossed by the segment `a → b` (3D DDA).
pub(crate) fn traverse_voxels(a: Vec3, b: Vec3, voxel_size: f64, out: &mut Vec<VoxelIndex>) {
    let seg = b - a;
    let len = seg.norm();
    let mut idx = [0i64; 3];
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for axis in 0..3 {
        let p = a[axis] / voxel_size;
        idx[axis] = libm::floor(p) as i64;
        let d = if len > 0.0 { seg[axis] / len } else { 0.0 };
        if d > 0.0 {
            step[axis] = 1;
            t_delta[axis] = voxel_size / d;
            t_max[axis] = ((idx[axis] + 1) as f64 * voxel_size - a[axis]) / d;
        } else if d < 0.0 {
            step[axis] = -1;
            t_delta[axis] = -voxel_size / d;
            t_max[axis] = (idx[axis] as f64 * voxel_size - a[axis]) / d;
        }
    }
    out.push(idx);
    loop {
        let axis = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
            0
        } else if t_max[1] <= t_max[2] {
            1
        } else {
            2
        };
        if t_max[axis] > len {
            break;
        }
        idx[axis] += step[axis];
        t_max[axis] += t_delta[axis];
        out.push(idx);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Image;
    use crate::voxel_map::MapConfig;

    fn one_pixel() -> Intrinsics {
        Intrinsics {
            fx: 1.0,
            fy: 1.0,
            cx: 0.5,
            cy: 0.5,
            width: 1,
            height: 1,
        }
    }

    fn single_ray_map(depth: f64, label: u8) -> SemanticVoxelMap {
        let mut map = SemanticVoxelMap::new(MapConfig::default()).unwrap();
        integrate_frame(
            &mut map,
            &Image::filled(1, 1, depth),
            &Image::filled(1, 1, label),
            &Pose::IDENTITY,
            &one_pixel(),
        )
        .unwrap();
        map
    }

    #[test]
    fn on_surface_voxel() {
        let map = single_ray_map(2.0, 3);
        let s = map.query(Vec3::new(0.0, 0.0, 2.0));
        assert!(s.tsdf.abs() <= 0.015, "{}", s.tsdf);
        assert_eq!(s.weight, 1.0);
        assert!((s.posterior[3] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn voxel_in_front_of_surface() {
        let map = single_ray_map(2.0, 3);
        let s = map.query(Vec3::new(0.0, 0.0, 1.9));
        assert!((s.tsdf - 0.10).abs() <= 0.015, "{}", s.tsdf);
        // Beyond the band nothing is touched.
        assert_eq!(map.query(Vec3::new(0.0, 0.0, 1.7)).weight, 0.0);
        assert_eq!(map.query(Vec3::new(0.0, 0.0, 2.3)).weight, 0.0);
    }

    #[test]
    fn blocks_allocate_on_first_integration() {
        let mut map = SemanticVoxelMap::new(MapConfig::default()).unwrap();
        assert_eq!(map.allocated_blocks(), 0);
        integrate_frame(
            &mut map,
            &Image::filled(1, 1, 2.0),
            &Image::filled(1, 1, 0),
            &Pose::IDENTITY,
            &one_pixel(),
        )
        .unwrap();
        // Band z ∈ [1.88, 2.12] at 0.48 m per block spans blocks 3 and 4.
        assert_eq!(map.allocated_blocks(), 2);
    }

    #[test]
    fn undefined_labels_update_geometry_only() {
        let map = single_ray_map(2.0, UNDEFINED);
        let v = map.voxel(map.config().voxel_index(Vec3::new(0.0, 0.0, 2.0)));
        assert_eq!(v.weight, 1.0);
        assert!(v.evidence.iter().all(|&n| n == 0));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut map = SemanticVoxelMap::new(MapConfig::default()).unwrap();
        let err = integrate_frame(
            &mut map,
            &Image::filled(2, 1, 2.0),
            &Image::filled(1, 1, 0),
            &Pose::IDENTITY,
            &one_pixel(),
        );
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn dda_visits_contiguous_voxels() {
        let mut out = Vec::new();
        traverse_voxels(Vec3::new(0.01, 0.02, 0.0), Vec3::new(0.31, 0.17, -0.2), 0.03, &mut out);
        for w in out.windows(2) {
            let manhattan: i64 = (0..3).map(|a| (w[1][a] - w[0][a]).abs()).sum();
            assert_eq!(manhattan, 1);
        }
        assert_eq!(out[0], [0, 0, 0]);
        assert_eq!(*out.last().unwrap(), [10, 5, -7]);
    }
}
