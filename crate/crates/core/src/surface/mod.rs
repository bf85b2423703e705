//! Surface extraction and pseudo-label rendering.
//!
//! The zero level set of the TSDF is polygonized with marching cubes, the
//! mesh is indexed by a BVH, and every camera ray's first mesh hit is used to
//! look up the class posterior of the voxel it falls in.

mod bvh;
mod marching_cubes;
mod pseudo;
mod raymarch;
#[rustfmt::skip]
mod tables;

pub use bvh::{build_bvh, raycast_brute_force, Bvh, BvhNode, RayHit, RAY_MAX, RAY_MIN};
pub use marching_cubes::{extract_mesh, TriangleMesh};
pub use pseudo::{render_pseudo_labels, PixelSource, PseudoLabelImage};
pub use raymarch::{tsdf_zero_crossing, trilinear_tsdf};
