//! Scene-adaptive semantic segmentation without external supervision.
//!
//! Per-frame label predictions are fused into a sparse TSDF + semantic voxel
//! map, the map is surfaced with marching cubes and ray traced from every
//! camera pose to render multi-view-consistent pseudo-labels, and a compact
//! per-pixel segmenter is retrained on those labels with experience replay.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the CLI and the
//! benchmark driver live in the `voxadapt` crate.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod camera;
pub mod continual;
pub mod error;
pub mod image;
pub mod math;
pub mod metrics;
pub mod rng;
pub mod scene;
pub mod segmenter;
pub mod surface;
pub mod voxel_map;

pub use error::{Error, Result};
pub use image::{ClassId, DepthImage, Image, LabelImage, INVALID_DEPTH, UNDEFINED};
