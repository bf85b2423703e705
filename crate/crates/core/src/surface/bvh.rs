use alloc::vec::Vec;

use crate::math::{Aabb, Vec3};

use super::TriangleMesh;

/// Hits closer than this are ignored.
pub const RAY_MIN: f64 = 0.05;
/// Hits farther than this are ignored (sensor range).
pub const RAY_MAX: f64 = 5.45;

const LEAF_SIZE: usize = 4;
/// Node boxes are padded so slab tests never reject a boundary hit.
const BOX_PAD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub point: Vec3,
    pub triangle: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BvhNode {
    Inner { bounds: Aabb, left: usize, right: usize },
    Leaf { bounds: Aabb, start: usize, count: usize },
}

impl BvhNode {
    pub fn bounds(&self) -> &Aabb {
        match self {
            BvhNode::Inner { bounds, .. } | BvhNode::Leaf { bounds, .. } => bounds,
        }
    }
}

/// Bounding volume hierarchy over the triangles of a mesh.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<BvhNode>,
    /// Triangle ids in leaf order.
    order: Vec<usize>,
    triangles: Vec<[Vec3; 3]>,
}

impl Bvh {
    pub fn nodes(&self) -> &[BvhNode] {
        &self.nodes
    }

    /// Triangle ids referenced by a leaf.
    pub fn leaf_triangles(&self, start: usize, count: usize) -> &[usize] {
        &self.order[start..start + count]
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Nearest hit with distance in `(RAY_MIN, RAY_MAX]`; `dir` must be unit
    /// length. Equal distances resolve to the lowest triangle id.
    pub fn raycast(&self, origin: Vec3, dir: Vec3) -> Option<RayHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<(f64, usize)> = None;
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            let Some((t0, _)) = node.bounds().ray_interval(origin, inv) else {
                continue;
            };
            let limit = best.map_or(RAY_MAX, |(t, _)| t);
            if t0 > limit * (1.0 + 1e-12) {
                continue;
            }
            match *node {
                BvhNode::Leaf { start, count, .. } => {
                    for &tri in &self.order[start..start + count] {
                        if let Some(t) = ray_triangle(origin, dir, &self.triangles[tri]) {
                            consider(&mut best, t, tri);
                        }
                    }
                }
                BvhNode::Inner { left, right, .. } => {
                    let dl = self.nodes[left].bounds().ray_interval(origin, inv).map(|r| r.0);
                    let dr = self.nodes[right].bounds().ray_interval(origin, inv).map(|r| r.0);
                    // Push the farther child first so the nearer one is popped next.
                    match (dl, dr) {
                        (Some(a), Some(b)) if a <= b => {
                            stack.push(right);
                            stack.push(left);
                        }
                        (Some(_), Some(_)) => {
                            stack.push(left);
                            stack.push(right);
                        }
                        (Some(_), None) => stack.push(left),
                        (None, Some(_)) => stack.push(right),
                        (None, None) => {}
                    }
                }
            }
        }
        best.map(|(t, tri)| RayHit {
            point: origin + dir * t,
            triangle: tri,
            distance: t,
        })
    }
}

fn consider(best: &mut Option<(f64, usize)>, t: f64, tri: usize) {
    if !(t > RAY_MIN && t <= RAY_MAX) {
        return;
    }
    let better = match *best {
        None => true,
        Some((bt, bi)) => t < bt || (t == bt && tri < bi),
    };
    if better {
        *best = Some((t, tri));
    }
}

/// Slack on the barycentric bounds so rays through shared edges and vertices
/// cannot slip between neighbouring triangles.
const BARY_EPS: f64 = 1e-9;

/// Möller–Trumbore ray/triangle intersection; returns the ray parameter.
pub(crate) fn ray_triangle(origin: Vec3, dir: Vec3, tri: &[Vec3; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(p) * inv;
    if !(-BARY_EPS..=1.0 + BARY_EPS).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = dir.dot(q) * inv;
    if v < -BARY_EPS || u + v > 1.0 + BARY_EPS {
        return None;
    }
    Some(e2.dot(q) * inv)
}

/// Reference intersection testing every triangle of the mesh.
pub fn raycast_brute_force(mesh: &TriangleMesh, origin: Vec3, dir: Vec3) -> Option<RayHit> {
    let mut best = None;
    for i in 0..mesh.triangles.len() {
        if let Some(t) = ray_triangle(origin, dir, &mesh.triangle(i)) {
            consider(&mut best, t, i);
        }
    }
    best.map(|(t, tri)| RayHit {
        point: origin + dir * t,
        triangle: tri,
        distance: t,
    })
}

fn triangle_bounds(t: &[Vec3; 3]) -> Aabb {
    let mut b = Aabb::empty();
    for &p in t {
        b.grow(p);
    }
    b
}

/// Median-split BVH with at most four triangles per leaf. An empty mesh
/// gives an empty hierarchy that never reports hits.
pub fn build_bvh(mesh: &TriangleMesh) -> Bvh {
    let triangles: Vec<[Vec3; 3]> = (0..mesh.triangles.len()).map(|i| mesh.triangle(i)).collect();
    let bounds: Vec<Aabb> = triangles.iter().map(triangle_bounds).collect();
    let centroids: Vec<Vec3> = bounds.iter().map(Aabb::center).collect();
    let mut order: Vec<usize> = (0..triangles.len()).collect();
    let mut nodes = Vec::new();
    if !order.is_empty() {
        build_node(&mut nodes, &mut order, 0, triangles.len(), &bounds, &centroids);
    }
    Bvh {
        nodes,
        order,
        triangles,
    }
}

fn build_node(
    nodes: &mut Vec<BvhNode>,
    order: &mut [usize],
    start: usize,
    end: usize,
    bounds: &[Aabb],
    centroids: &[Vec3],
) -> usize {
    let mut node_box = Aabb::empty();
    let mut centroid_box = Aabb::empty();
    for &t in &order[start..end] {
        node_box = node_box.union(&bounds[t]);
        centroid_box.grow(centroids[t]);
    }
    node_box.min = node_box.min - Vec3::splat(BOX_PAD);
    node_box.max += Vec3::splat(BOX_PAD);

    let id = nodes.len();
    let count = end - start;
    if count <= LEAF_SIZE {
        nodes.push(BvhNode::Leaf {
            bounds: node_box,
            start,
            count,
        });
        return id;
    }
    let ext = centroid_box.extent();
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = start + count / 2;
    order[start..end].select_nth_unstable_by(count / 2, |&a, &b| {
        centroids[a][axis]
            .total_cmp(&centroids[b][axis])
            .then(a.cmp(&b))
    });
    // Placeholder, patched once both children exist.
    nodes.push(BvhNode::Leaf {
        bounds: node_box,
        start,
        count,
    });
    let left = build_node(nodes, order, start, mid, bounds, centroids);
    let right = build_node(nodes, order, mid, end, bounds, centroids);
    nodes[id] = BvhNode::Inner {
        bounds: node_box,
        left,
        right,
    };
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use alloc::vec;

    fn quad_mesh(x: f64) -> TriangleMesh {
        // Square in the plane x = const spanning y, z ∈ [-1, 1].
        TriangleMesh {
            vertices: vec![
                Vec3::new(x, -1.0, -1.0),
                Vec3::new(x, 1.0, -1.0),
                Vec3::new(x, 1.0, 1.0),
                Vec3::new(x, -1.0, 1.0),
            ],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
            vertex_classes: vec![0; 4],
        }
    }

    #[test]
    fn single_triangle_is_one_leaf() {
        let mut m = quad_mesh(1.0);
        m.triangles.truncate(1);
        let bvh = build_bvh(&m);
        assert_eq!(bvh.nodes().len(), 1);
        assert!(matches!(bvh.nodes()[0], BvhNode::Leaf { count: 1, .. }));
    }

    #[test]
    fn perpendicular_wall_hit() {
        let bvh = build_bvh(&quad_mesh(2.0));
        let hit = bvh.raycast(Vec3::new(0.0, 0.1, 0.2), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((hit.distance - 2.0).abs() < 1e-5);
        assert!((hit.point.x - 2.0).abs() < 1e-12);
    }

    #[test]
    fn parallel_and_missing_rays() {
        let bvh = build_bvh(&quad_mesh(2.0));
        assert!(bvh.raycast(Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0)).is_none());
        assert!(bvh.raycast(Vec3::ZERO, Vec3::new(-1.0, 0.0, 0.0)).is_none());
        assert!(bvh.raycast(Vec3::new(0.0, 5.0, 0.0), Vec3::new(1.0, 0.0, 0.0)).is_none());
    }

    #[test]
    fn range_limits() {
        let near = build_bvh(&quad_mesh(0.04));
        assert!(near.raycast(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0)).is_none());
        let far = build_bvh(&quad_mesh(5.5));
        assert!(far.raycast(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0)).is_none());
        let edge = build_bvh(&quad_mesh(5.45));
        assert!(edge.raycast(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0)).is_some());
    }

    fn random_soup(n: usize, seed: u64) -> TriangleMesh {
        let mut r = rng::stream(seed, &[]);
        let mut m = TriangleMesh::default();
        for i in 0..n {
            let c = Vec3::new(
                rng::uniform(&mut r, -2.0, 2.0),
                rng::uniform(&mut r, -2.0, 2.0),
                rng::uniform(&mut r, -2.0, 2.0),
            );
            for _ in 0..3 {
                m.vertices.push(c + Vec3::new(
                    rng::uniform(&mut r, -0.3, 0.3),
                    rng::uniform(&mut r, -0.3, 0.3),
                    rng::uniform(&mut r, -0.3, 0.3),
                ));
            }
            let b = (3 * i) as u32;
            m.triangles.push([b, b + 1, b + 2]);
            m.vertex_classes.extend([0, 0, 0]);
        }
        m
    }

    #[test]
    fn structure_invariants() {
        let mesh = random_soup(300, 1);
        let bvh = build_bvh(&mesh);
        let mut seen = vec![0usize; 300];
        for node in bvh.nodes() {
            match *node {
                BvhNode::Leaf { start, count, bounds } => {
                    assert!(count <= 4 && count > 0);
                    for &t in bvh.leaf_triangles(start, count) {
                        seen[t] += 1;
                        assert!(bounds.contains_box(&triangle_bounds(&mesh.triangle(t))));
                    }
                }
                BvhNode::Inner { bounds, left, right } => {
                    assert!(bounds.contains_box(bvh.nodes()[left].bounds()));
                    assert!(bounds.contains_box(bvh.nodes()[right].bounds()));
                }
            }
        }
        assert!(seen.iter().all(|&n| n == 1));
    }

    #[test]
    fn matches_brute_force_on_random_rays() {
        let mesh = random_soup(400, 2);
        let bvh = build_bvh(&mesh);
        let mut r = rng::stream(3, &[]);
        let mut hits = 0;
        for _ in 0..2000 {
            let o = Vec3::new(
                rng::uniform(&mut r, -3.0, 3.0),
                rng::uniform(&mut r, -3.0, 3.0),
                rng::uniform(&mut r, -3.0, 3.0),
            );
            let d = Vec3::new(
                rng::standard_normal(&mut r),
                rng::standard_normal(&mut r),
                rng::standard_normal(&mut r),
            )
            .normalized();
            let a = bvh.raycast(o, d);
            assert_eq!(a, raycast_brute_force(&mesh, o, d));
            hits += usize::from(a.is_some());
        }
        assert!(hits > 200);
    }
}
