use crate::math::Vec3;
use crate::voxel_map::SemanticVoxelMap;

/// Trilinear TSDF over voxel centers; `None` unless all eight neighbors are
/// observed.
pub fn trilinear_tsdf(map: &SemanticVoxelMap, p: Vec3) -> Option<f64> {
    let s = map.config().voxel_size;
    let g = [p.x / s - 0.5, p.y / s - 0.5, p.z / s - 0.5];
    let base = g.map(|v| libm::floor(v) as i64);
    let f = [
        g[0] - base[0] as f64,
        g[1] - base[1] as f64,
        g[2] - base[2] as f64,
    ];
    let mut acc = 0.0;
    for corner in 0..8 {
        let o = [corner & 1, (corner >> 1) & 1, (corner >> 2) & 1];
        let (t, w) = map.tsdf_at([
            base[0] + o[0] as i64,
            base[1] + o[1] as i64,
            base[2] + o[2] as i64,
        ])?;
        if w <= 0.0 {
            return None;
        }
        let mut k = 1.0;
        for a in 0..3 {
            k *= if o[a] == 1 { f[a] } else { 1.0 - f[a] };
        }
        acc += k * t;
    }
    Some(acc)
}

/// First positive-to-negative TSDF crossing along a unit ray, found by
/// fixed-step marching in `[t_min, t_max]` and refined linearly between the
/// bracketing samples.
pub fn tsdf_zero_crossing(
    map: &SemanticVoxelMap,
    origin: Vec3,
    dir: Vec3,
    step: f64,
    t_min: f64,
    t_max: f64,
) -> Option<f64> {
    let mut prev: Option<(f64, f64)> = None;
    let mut t = t_min;
    while t <= t_max {
        match trilinear_tsdf(map, origin + dir * t) {
            Some(v) => {
                if let Some((pt, pv)) = prev {
                    if pv >= 0.0 && v < 0.0 {
                        return Some(pt + (t - pt) * pv / (pv - v));
                    }
                }
                prev = Some((t, v));
            }
            None => prev = None,
        }
        t += step;
    }
    None
}
