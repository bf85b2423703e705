use alloc::vec::Vec;

use crate::camera::{Intrinsics, Pose};
use crate::error::Result;
use crate::image::{Image, LabelImage, ProbImage, UNDEFINED};
use crate::voxel_map::SemanticVoxelMap;

use super::Bvh;

/// Where a pseudo-label pixel came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum PixelSource {
    Undefined = 0,
    Map = 1,
    Fallback = 2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabelImage {
    pub labels: LabelImage,
    /// Voxel posterior of each `Map` pixel (zeros elsewhere), when requested.
    pub posteriors: Option<ProbImage>,
    pub source: Image<PixelSource>,
}

impl PseudoLabelImage {
    pub fn count(&self, source: PixelSource) -> usize {
        self.source.as_slice().iter().filter(|&&s| s == source).count()
    }
}

/// Casts every pixel ray against the mesh and labels hits with the most
/// probable class of the voxel containing the hit point.
///
/// Pixels without a hit, or whose hit voxel was never observed, copy the
/// `fallback` label (or stay undefined when the fallback is undefined).
pub fn render_pseudo_labels(
    map: &SemanticVoxelMap,
    bvh: &Bvh,
    pose: &Pose,
    intr: &Intrinsics,
    fallback: &LabelImage,
    with_posteriors: bool,
) -> Result<PseudoLabelImage> {
    fallback.ensure_dims(intr.dims())?;
    let (w, h) = intr.dims();
    let cfg = map.config();
    let mut labels = Vec::with_capacity(w * h);
    let mut source = Vec::with_capacity(w * h);
    let mut posteriors = with_posteriors.then(|| ProbImage::zeros(w, h, cfg.class_count));

    for v in 0..h {
        for u in 0..w {
            let dir = pose.rotate(intr.pixel_ray(u, v)).normalized();
            let from_map = bvh.raycast(pose.translation, dir).and_then(|hit| {
                let idx = cfg.voxel_index(hit.point);
                // A voxel with geometry but no label evidence has no semantics.
                let v = map.voxel(idx);
                (v.weight > 0.0 && v.evidence.iter().any(|&n| n > 0)).then(|| (idx, v.map_class()))
            });
            match from_map {
                Some((idx, class)) => {
                    labels.push(class);
                    source.push(PixelSource::Map);
                    if let Some(p) = posteriors.as_mut() {
                        p.pixel_mut(u, v)
                            .copy_from_slice(&map.voxel(idx).posterior(map.likelihood()));
                    }
                }
                None => {
                    let f = *fallback.get(u, v);
                    labels.push(f);
                    source.push(if f == UNDEFINED {
                        PixelSource::Undefined
                    } else {
                        PixelSource::Fallback
                    });
                }
            }
        }
    }
    Ok(PseudoLabelImage {
        labels: Image::from_vec(w, h, labels)?,
        posteriors,
        source: Image::from_vec(w, h, source)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{build_bvh, extract_mesh};
    use crate::voxel_map::MapConfig;

    #[test]
    fn empty_map_falls_back_everywhere() {
        let map = SemanticVoxelMap::new(MapConfig::default()).unwrap();
        let bvh = build_bvh(&extract_mesh(&map));
        let intr = Intrinsics::with_size(8, 4);
        let fallback = Image::from_fn(8, 4, |u, v| if u == 0 { UNDEFINED } else { ((u + v) % 8) as u8 });
        let out = render_pseudo_labels(&map, &bvh, &Pose::IDENTITY, &intr, &fallback, false).unwrap();
        assert_eq!(out.labels, fallback);
        assert_eq!(out.count(PixelSource::Fallback), 28);
        assert_eq!(out.count(PixelSource::Undefined), 4);
    }

    /// Wall at z = 1.5 in front of an identity camera, optionally labelled.
    fn plane_map(class: Option<u8>) -> SemanticVoxelMap {
        let mut map = SemanticVoxelMap::new(MapConfig::default()).unwrap();
        for i in -40..40 {
            for j in -20..20 {
                for k in 45..56 {
                    let c = map.config().voxel_center([i, j, k]);
                    let sdf: f64 = 1.5 - c.z;
                    map.set_tsdf([i, j, k], sdf.clamp(-0.12, 0.12), 1.0);
                    if let Some(class) = class.filter(|_| sdf.abs() < 0.12) {
                        map.observe([i, j, k], class).unwrap();
                    }
                }
            }
        }
        map
    }

    #[test]
    fn unlabelled_geometry_falls_back() {
        let map = plane_map(None);
        let bvh = build_bvh(&extract_mesh(&map));
        let intr = Intrinsics::with_size(16, 8);
        let fallback = Image::filled(16, 8, 3u8);
        let out = render_pseudo_labels(&map, &bvh, &Pose::IDENTITY, &intr, &fallback, false).unwrap();
        assert_eq!(out.labels, fallback);
        assert_eq!(out.count(PixelSource::Fallback), 128);
    }

    #[test]
    fn plane_observed_as_one_class() {
        let map = plane_map(Some(6));
        let bvh = build_bvh(&extract_mesh(&map));
        let intr = Intrinsics::with_size(16, 8);
        let fallback = Image::filled(16, 8, 2u8);
        let out = render_pseudo_labels(&map, &bvh, &Pose::IDENTITY, &intr, &fallback, true).unwrap();
        assert!(out.labels.as_slice().iter().all(|&l| l == 6));
        assert_eq!(out.count(PixelSource::Map), 128);
        let p = out.posteriors.unwrap();
        assert!((p.pixel(3, 3)[6] - 0.9).abs() < 1e-12);
    }
}
