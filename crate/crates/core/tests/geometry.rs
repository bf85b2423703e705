use voxadapt_core::math::Vec3;
use voxadapt_core::rng;
use voxadapt_core::surface::{build_bvh, extract_mesh, raycast_brute_force, trilinear_tsdf, tsdf_zero_crossing};
use voxadapt_core::voxel_map::{MapConfig, SemanticVoxelMap};

const CENTER: Vec3 = Vec3 { x: 1.0, y: 1.0, z: 1.0 };
const RADIUS: f64 = 0.5;

/// Exact truncated signed distance of a sphere, written on a dense grid.
fn sphere_map() -> SemanticVoxelMap {
    let cfg = MapConfig::with_voxel_size(0.03, 3);
    let mut map = SemanticVoxelMap::new(cfg).unwrap();
    let lo = ((CENTER.x - RADIUS - 0.2) / cfg.voxel_size).floor() as i64;
    let hi = ((CENTER.x + RADIUS + 0.2) / cfg.voxel_size).ceil() as i64;
    for i in lo..=hi {
        for j in lo..=hi {
            for k in lo..=hi {
                let c = cfg.voxel_center([i, j, k]);
                let sdf = (c - CENTER).norm() - RADIUS;
                map.set_tsdf([i, j, k], sdf.clamp(-cfg.truncation, cfg.truncation), 1.0);
            }
        }
    }
    map
}

fn random_unit(r: &mut rng::StreamRng) -> Vec3 {
    Vec3::new(rng::standard_normal(r), rng::standard_normal(r), rng::standard_normal(r)).normalized()
}

#[test]
fn sphere_area_within_five_percent() {
    let mesh = extract_mesh(&sphere_map());
    let exact = 4.0 * core::f64::consts::PI * RADIUS * RADIUS;
    let err = (mesh.area() - exact).abs() / exact;
    assert!(err < 0.05, "area {} vs {exact}", mesh.area());
}

#[test]
fn mesh_vertices_lie_on_the_interpolated_zero_level() {
    let map = sphere_map();
    let delta = map.config().truncation;
    let mesh = extract_mesh(&map);
    for v in &mesh.vertices {
        let t = trilinear_tsdf(&map, *v).expect("vertex inside observed grid");
        assert!(t.abs() < 1e-6 * delta, "tsdf {t} at {v:?}");
    }
}

#[test]
fn bvh_matches_brute_force_on_ten_thousand_rays() {
    let mesh = extract_mesh(&sphere_map());
    let bvh = build_bvh(&mesh);
    let mut r = rng::stream(11, &[]);
    let mut hits = 0;
    for _ in 0..10_000 {
        let origin = CENTER + random_unit(&mut r) * rng::uniform(&mut r, 0.0, 2.0);
        let dir = random_unit(&mut r);
        let a = bvh.raycast(origin, dir);
        assert_eq!(a, raycast_brute_force(&mesh, origin, dir));
        hits += usize::from(a.is_some());
    }
    assert!(hits > 2_000, "only {hits} hits");
}

#[test]
fn mesh_hits_agree_with_tsdf_zero_crossings() {
    let map = sphere_map();
    let s = map.config().voxel_size;
    let bvh = build_bvh(&extract_mesh(&map));
    let mut r = rng::stream(12, &[]);
    let (mut hitting, mut agree) = (0, 0);
    for _ in 0..2_000 {
        // Outside the sphere, aimed roughly at it.
        let origin = CENTER + random_unit(&mut r) * rng::uniform(&mut r, 0.6, 0.65);
        let target = CENTER + random_unit(&mut r) * 0.3;
        let dir = (target - origin).normalized();
        let Some(hit) = bvh.raycast(origin, dir) else { continue };
        hitting += 1;
        if let Some(t) = tsdf_zero_crossing(&map, origin, dir, s / 4.0, 0.0, 2.0) {
            if (t - hit.distance).abs() <= s {
                agree += 1;
            }
        }
    }
    assert!(hitting > 1_000);
    assert!(agree as f64 >= 0.99 * hitting as f64, "{agree}/{hitting}");
}
