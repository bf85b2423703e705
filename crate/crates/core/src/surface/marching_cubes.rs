use alloc::vec::Vec;
use core::hash::BuildHasherDefault;

use hashbrown::HashMap;

use crate::image::ClassId;
use crate::math::Vec3;
use crate::voxel_map::{CoordHasher, SemanticVoxelMap, VoxelIndex};

use super::tables::{CORNERS, EDGES, EDGE_TABLE, TRIANGLE_TABLE};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    /// Most probable class of the voxel nearest to each vertex.
    pub vertex_classes: Vec<ClassId>,
}

impl TriangleMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        self.triangles[i].map(|v| self.vertices[v as usize])
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|i| {
                let [a, b, c] = self.triangle(i);
                (b - a).cross(c - a).norm() * 0.5
            })
            .sum()
    }
}

/// Key of a grid edge: its lower endpoint and axis.
type EdgeKey = (VoxelIndex, u8);

/// Marching cubes over the voxel-center lattice at iso level 0.
///
/// Cells with any unobserved corner (weight 0) are skipped. A corner is
/// inside when its TSDF is negative. Vertices are shared between cells.
pub fn extract_mesh(map: &SemanticVoxelMap) -> TriangleMesh {
    let cfg = map.config();
    let mut mesh = TriangleMesh::default();
    let mut edge_vertices: HashMap<EdgeKey, u32, BuildHasherDefault<CoordHasher>> =
        HashMap::default();

    for coord in map.block_coords() {
        let block = map.block(coord).expect("coordinate from block table");
        for local in 0..block.weight.len() {
            if block.weight[local] <= 0.0 {
                continue;
            }
            let base = map.voxel_index_in_block(coord, local);
            let mut values = [0.0; 8];
            let mut observed = true;
            for (i, off) in CORNERS.iter().enumerate() {
                let idx = [base[0] + off[0], base[1] + off[1], base[2] + off[2]];
                match map.tsdf_at(idx) {
                    Some((t, w)) if w > 0.0 => values[i] = t,
                    _ => {
                        observed = false;
                        break;
                    }
                }
            }
            if !observed {
                continue;
            }
            let case = values
                .iter()
                .enumerate()
                .fold(0usize, |acc, (i, &v)| if v < 0.0 { acc | (1 << i) } else { acc });
            let crossed = EDGE_TABLE[case];
            if crossed == 0 {
                continue;
            }

            let mut cell_vertices = [u32::MAX; 12];
            for (e, &[a, b]) in EDGES.iter().enumerate() {
                if crossed & (1 << e) == 0 {
                    continue;
                }
                let ia = offset(base, CORNERS[a]);
                let ib = offset(base, CORNERS[b]);
                let axis = (0..3).find(|&k| ia[k] != ib[k]).expect("edge spans one axis") as u8;
                let (lo, hi, vlo, vhi) = if ia[axis as usize] < ib[axis as usize] {
                    (ia, ib, values[a], values[b])
                } else {
                    (ib, ia, values[b], values[a])
                };
                let key = (lo, axis);
                let id = *edge_vertices.entry(key).or_insert_with(|| {
                    let t = vlo / (vlo - vhi);
                    let plo = cfg.voxel_center(lo);
                    let phi = cfg.voxel_center(hi);
                    let nearest = if t <= 0.5 { lo } else { hi };
                    let class = map.voxel(nearest).map_class();
                    mesh.vertices.push(plo + (phi - plo) * t);
                    mesh.vertex_classes.push(class);
                    (mesh.vertices.len() - 1) as u32
                });
                cell_vertices[e] = id;
            }

            for tri in TRIANGLE_TABLE[case].chunks(3) {
                if tri[0] < 0 {
                    break;
                }
                mesh.triangles.push([
                    cell_vertices[tri[0] as usize],
                    cell_vertices[tri[1] as usize],
                    cell_vertices[tri[2] as usize],
                ]);
            }
        }
    }
    mesh
}

fn offset(a: VoxelIndex, o: [i64; 3]) -> VoxelIndex {
    [a[0] + o[0], a[1] + o[1], a[2] + o[2]]
}
