//! Sparse block-hashed voxel grid with TSDF geometry and per-voxel class
//! posteriors.
//!
//! Voxels live in dense `block_edge³` blocks keyed by integer block
//! coordinates, so locating the voxel of a world point is one hash lookup.
//! A voxel that was never written reads as `(tsdf = +δ, weight = 0, uniform
//! posterior)`.
//!
//! The class posterior is kept as per-class observation counts. Under the
//! symmetric ε-flip measurement model the recursive Bayes update only ever
//! multiplies a class by one of two likelihood values, so the counts are a
//! sufficient statistic and the normalized log-posterior is materialized from
//! them on demand. This makes the result independent of observation order,
//! bit for bit.

mod integrate;
mod semantic;

use alloc::vec;
use alloc::vec::Vec;
use core::hash::{BuildHasherDefault, Hasher};

use hashbrown::HashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ClassId;
use crate::math::Vec3;

pub use integrate::{integrate_frame, IntegrationStats};
pub use semantic::{update_semantic_voxel, update_tsdf_voxel, LabelLikelihood};

/// Integer coordinates of a voxel in the global grid.
pub type VoxelIndex = [i64; 3];
/// Integer coordinates of a block.
pub type BlockCoord = [i64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapConfig {
    pub voxel_size: f64,
    /// TSDF truncation distance δ in meters.
    pub truncation: f64,
    pub max_weight: f64,
    pub class_count: usize,
    /// Measurement off-mass ε of the label likelihood.
    pub epsilon: f64,
    pub block_edge: usize,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self::with_voxel_size(0.03, 8)
    }
}

impl MapConfig {
    /// Defaults around a voxel size: δ = 4 voxels, weight clamp 1e4, ε = 0.1,
    /// 16³ blocks.
    pub fn with_voxel_size(voxel_size: f64, class_count: usize) -> Self {
        Self {
            voxel_size,
            truncation: 4.0 * voxel_size,
            max_weight: 1e4,
            class_count,
            epsilon: 0.1,
            block_edge: 16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.voxel_size > 0.0 && self.voxel_size.is_finite()) {
            return Err(Error::InvalidConfig("voxel size must be positive"));
        }
        if !(self.truncation >= self.voxel_size && self.truncation.is_finite()) {
            return Err(Error::InvalidConfig("truncation must be at least one voxel"));
        }
        if !(self.max_weight > 0.0) {
            return Err(Error::InvalidConfig("max weight must be positive"));
        }
        if self.class_count < 2 || self.class_count > usize::from(crate::UNDEFINED) {
            return Err(Error::InvalidConfig("class count must be in 2..=255"));
        }
        let c = self.class_count as f64;
        if !(self.epsilon >= 0.0 && self.epsilon < (c - 1.0) / c) {
            return Err(Error::InvalidConfig("epsilon must be in [0, (C-1)/C)"));
        }
        if self.block_edge == 0 || self.block_edge > 256 {
            return Err(Error::InvalidConfig("block edge must be in 1..=256"));
        }
        Ok(())
    }

    pub fn likelihood(&self) -> LabelLikelihood {
        LabelLikelihood::new(self.class_count, self.epsilon)
    }

    pub fn voxel_index(&self, p: Vec3) -> VoxelIndex {
        let s = self.voxel_size;
        [
            libm::floor(p.x / s) as i64,
            libm::floor(p.y / s) as i64,
            libm::floor(p.z / s) as i64,
        ]
    }

    pub fn voxel_center(&self, idx: VoxelIndex) -> Vec3 {
        let s = self.voxel_size;
        Vec3::new(
            (idx[0] as f64 + 0.5) * s,
            (idx[1] as f64 + 0.5) * s,
            (idx[2] as f64 + 0.5) * s,
        )
    }
}

/// One voxel as a value.
#[derive(Debug, Clone, PartialEq)]
pub struct Voxel {
    pub tsdf: f64,
    pub weight: f64,
    /// Number of semantic observations of each class.
    pub evidence: Vec<u32>,
}

impl Voxel {
    pub fn absent(config: &MapConfig) -> Self {
        Self {
            tsdf: config.truncation,
            weight: 0.0,
            evidence: vec![0; config.class_count],
        }
    }

    pub fn log_posterior(&self, lik: &LabelLikelihood) -> Vec<f64> {
        lik.log_posterior(&self.evidence)
    }

    pub fn posterior(&self, lik: &LabelLikelihood) -> Vec<f64> {
        self.log_posterior(lik).into_iter().map(libm::exp).collect()
    }

    /// Most probable class; ties resolve to the lowest id.
    pub fn map_class(&self) -> ClassId {
        argmax_u32(&self.evidence) as ClassId
    }
}

/// Result of a point query.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelSample {
    pub tsdf: f64,
    pub weight: f64,
    pub posterior: Vec<f64>,
}

pub(crate) fn argmax_u32(values: &[u32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Dense block storage, structure-of-arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub tsdf: Vec<f64>,
    pub weight: Vec<f64>,
    /// `voxel * class_count + class`.
    pub evidence: Vec<u32>,
}

impl Block {
    fn new(config: &MapConfig) -> Self {
        let n = config.block_edge.pow(3);
        Self {
            tsdf: vec![config.truncation; n],
            weight: vec![0.0; n],
            evidence: vec![0; n * config.class_count],
        }
    }
}

/// FxHash-style hasher: deterministic across runs and cheap for integer keys.
#[derive(Default, Clone, Copy)]
pub struct CoordHasher(u64);

impl Hasher for CoordHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.write_u64(u64::from(b));
        }
    }

    fn write_u64(&mut self, v: u64) {
        self.0 = (self.0.rotate_left(5) ^ v).wrapping_mul(0x51_7C_C1_B7_27_22_0A_95);
    }

    fn write_i64(&mut self, v: i64) {
        self.write_u64(v as u64);
    }

    fn write_usize(&mut self, v: usize) {
        self.write_u64(v as u64);
    }
}

type BlockTable = HashMap<BlockCoord, Block, BuildHasherDefault<CoordHasher>>;

#[derive(Debug, Clone)]
pub struct SemanticVoxelMap {
    config: MapConfig,
    likelihood: LabelLikelihood,
    blocks: BlockTable,
}

impl PartialEq for SemanticVoxelMap {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.blocks == other.blocks
    }
}

impl SemanticVoxelMap {
    pub fn new(config: MapConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            likelihood: config.likelihood(),
            blocks: BlockTable::default(),
        })
    }

    pub fn config(&self) -> &MapConfig {
        &self.config
    }

    pub fn likelihood(&self) -> &LabelLikelihood {
        &self.likelihood
    }

    pub fn allocated_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_coord(&self, idx: VoxelIndex) -> (BlockCoord, usize) {
        let e = self.config.block_edge as i64;
        let b = [idx[0].div_euclid(e), idx[1].div_euclid(e), idx[2].div_euclid(e)];
        let l = [idx[0].rem_euclid(e), idx[1].rem_euclid(e), idx[2].rem_euclid(e)];
        (b, (l[0] + e * (l[1] + e * l[2])) as usize)
    }

    fn block_or_insert(&mut self, coord: BlockCoord) -> &mut Block {
        let config = self.config;
        self.blocks.entry(coord).or_insert_with(|| Block::new(&config))
    }

    /// TSDF value and weight, or `None` for an unallocated block.
    pub fn tsdf_at(&self, idx: VoxelIndex) -> Option<(f64, f64)> {
        let (b, l) = self.block_coord(idx);
        self.blocks.get(&b).map(|blk| (blk.tsdf[l], blk.weight[l]))
    }

    pub fn voxel(&self, idx: VoxelIndex) -> Voxel {
        let (b, l) = self.block_coord(idx);
        let c = self.config.class_count;
        match self.blocks.get(&b) {
            Some(blk) => Voxel {
                tsdf: blk.tsdf[l],
                weight: blk.weight[l],
                evidence: blk.evidence[l * c..(l + 1) * c].to_vec(),
            },
            None => Voxel::absent(&self.config),
        }
    }

    /// Most probable class of an observed voxel; `None` when its weight is 0.
    pub fn class_at(&self, idx: VoxelIndex) -> Option<ClassId> {
        let (b, l) = self.block_coord(idx);
        let c = self.config.class_count;
        let blk = self.blocks.get(&b)?;
        (blk.weight[l] > 0.0).then(|| argmax_u32(&blk.evidence[l * c..(l + 1) * c]) as ClassId)
    }

    /// Stored state of the voxel containing `point`.
    pub fn query(&self, point: Vec3) -> VoxelSample {
        let v = self.voxel(self.config.voxel_index(point));
        VoxelSample {
            tsdf: v.tsdf,
            weight: v.weight,
            posterior: v.posterior(&self.likelihood),
        }
    }

    /// Overwrites a voxel's geometry, allocating its block.
    pub fn set_tsdf(&mut self, idx: VoxelIndex, tsdf: f64, weight: f64) {
        let (b, l) = self.block_coord(idx);
        let blk = self.block_or_insert(b);
        blk.tsdf[l] = tsdf;
        blk.weight[l] = weight;
    }

    /// Weighted TSDF update of one voxel.
    pub fn update_tsdf(&mut self, idx: VoxelIndex, sdf: f64, obs_weight: f64) {
        let (b, l) = self.block_coord(idx);
        let config = self.config;
        let blk = self.block_or_insert(b);
        let (t, w) = semantic::tsdf_update(&config, blk.tsdf[l], blk.weight[l], sdf, obs_weight);
        blk.tsdf[l] = t;
        blk.weight[l] = w;
    }

    /// Bayesian label update of one voxel.
    pub fn observe(&mut self, idx: VoxelIndex, class: ClassId) -> Result<()> {
        let c = self.config.class_count;
        if usize::from(class) >= c {
            return Err(Error::ClassOutOfRange {
                class: u32::from(class),
                classes: c,
            });
        }
        let (b, l) = self.block_coord(idx);
        let lik = self.likelihood;
        let blk = self.block_or_insert(b);
        let ev = &mut blk.evidence[l * c..(l + 1) * c];
        lik.check_possible(ev, class)?;
        ev[usize::from(class)] += 1;
        Ok(())
    }

    /// Block coordinates in ascending order.
    pub fn block_coords(&self) -> Vec<BlockCoord> {
        let mut coords: Vec<BlockCoord> = self.blocks.keys().copied().collect();
        coords.sort_unstable();
        coords
    }

    pub fn block(&self, coord: BlockCoord) -> Option<&Block> {
        self.blocks.get(&coord)
    }

    /// Inserts a whole block, replacing any existing one.
    pub fn insert_block(&mut self, coord: BlockCoord, block: Block) -> Result<()> {
        let n = self.config.block_edge.pow(3);
        if block.tsdf.len() != n
            || block.weight.len() != n
            || block.evidence.len() != n * self.config.class_count
        {
            return Err(Error::InvalidConfig("block arrays do not match the map config"));
        }
        self.blocks.insert(coord, block);
        Ok(())
    }

    /// Global index of voxel `local` in block `coord`.
    pub fn voxel_index_in_block(&self, coord: BlockCoord, local: usize) -> VoxelIndex {
        let e = self.config.block_edge;
        let (lx, ly, lz) = (local % e, (local / e) % e, local / (e * e));
        let e = e as i64;
        [
            coord[0] * e + lx as i64,
            coord[1] * e + ly as i64,
            coord[2] * e + lz as i64,
        ]
    }

    /// Every voxel with `weight > 0`, in block then local order.
    pub fn observed_voxels(&self) -> Vec<(VoxelIndex, Voxel)> {
        let c = self.config.class_count;
        let mut out = Vec::new();
        for coord in self.block_coords() {
            let blk = &self.blocks[&coord];
            for l in 0..blk.weight.len() {
                if blk.weight[l] > 0.0 {
                    out.push((
                        self.voxel_index_in_block(coord, l),
                        Voxel {
                            tsdf: blk.tsdf[l],
                            weight: blk.weight[l],
                            evidence: blk.evidence[l * c..(l + 1) * c].to_vec(),
                        },
                    ));
                }
            }
        }
        out
    }

    /// `(voxel center, max posterior probability)` of every observed voxel
    /// within one voxel of the surface.
    pub fn confidence_field(&self) -> Vec<(Vec3, f64)> {
        let vs = self.config.voxel_size;
        self.observed_voxels()
            .into_iter()
            .filter(|(_, v)| v.tsdf.abs() <= vs)
            .map(|(idx, v)| {
                let conf = self.likelihood.max_probability(&v.evidence);
                (self.config.voxel_center(idx), conf)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> MapConfig {
        MapConfig::default()
    }

    #[test]
    fn fresh_map_returns_absent_default() {
        let map = SemanticVoxelMap::new(cfg()).unwrap();
        let s = map.query(Vec3::ZERO);
        assert_eq!(s.tsdf, 0.12);
        assert_eq!(s.weight, 0.0);
        for p in &s.posterior {
            assert!((p - 0.125).abs() < 1e-15);
        }
        assert_eq!(map.allocated_blocks(), 0);
        assert!(map.confidence_field().is_empty());
    }

    #[test]
    fn equal_configs_give_equal_maps() {
        assert_eq!(SemanticVoxelMap::new(cfg()).unwrap(), SemanticVoxelMap::new(cfg()).unwrap());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            MapConfig { voxel_size: 0.0, ..cfg() },
            MapConfig { truncation: 0.01, ..cfg() },
            MapConfig { epsilon: 0.9, ..cfg() },
            MapConfig { class_count: 1, ..cfg() },
            MapConfig { block_edge: 0, ..cfg() },
        ];
        for c in bad {
            assert!(SemanticVoxelMap::new(c).is_err(), "{c:?}");
        }
    }

    #[test]
    fn negative_coordinates_index_correctly() {
        let mut map = SemanticVoxelMap::new(cfg()).unwrap();
        let p = Vec3::new(-0.01, -0.5, 0.02);
        let idx = map.config().voxel_index(p);
        assert_eq!(idx, [-1, -17, 0]);
        map.set_tsdf(idx, -0.02, 3.0);
        map.observe(idx, 4).unwrap();
        let s = map.query(p);
        assert_eq!((s.tsdf, s.weight), (-0.02, 3.0));
        assert_eq!(map.class_at(idx), Some(4));
        assert_eq!(map.voxel(idx).map_class(), 4);
        let (b, l) = map.block_coord(idx);
        assert_eq!(map.voxel_index_in_block(b, l), idx);
    }

    #[test]
    fn confidence_of_single_observation() {
        let mut map = SemanticVoxelMap::new(cfg()).unwrap();
        map.set_tsdf([0, 0, 0], 0.0, 1.0);
        map.observe([0, 0, 0], 3).unwrap();
        let field = map.confidence_field();
        assert_eq!(field.len(), 1);
        assert!((field[0].1 - 0.9).abs() < 1e-12);
    }

    #[test]
    fn contested_voxel_confidence_is_one_half() {
        let mut map = SemanticVoxelMap::new(cfg()).unwrap();
        map.set_tsdf([2, 0, 0], 0.01, 1.0);
        for _ in 0..5 {
            map.observe([2, 0, 0], 1).unwrap();
            map.observe([2, 0, 0], 6).unwrap();
        }
        let field = map.confidence_field();
        let p = map.voxel([2, 0, 0]).posterior(map.likelihood());
        assert!((p[1] - 0.5).abs() < 1e-7 && (p[6] - 0.5).abs() < 1e-7);
        assert!((field[0].1 - 0.5).abs() < 1e-7);
    }

    #[test]
    fn far_voxels_are_not_in_confidence_field() {
        let mut map = SemanticVoxelMap::new(cfg()).unwrap();
        map.set_tsdf([0, 0, 0], 0.05, 1.0);
        map.set_tsdf([1, 0, 0], 0.03, 1.0);
        assert_eq!(map.confidence_field().len(), 1);
    }
}
