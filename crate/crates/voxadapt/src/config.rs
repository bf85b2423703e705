//! Run configuration: every module's settings plus the global seed.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use serde::{Deserialize, Serialize};
use voxadapt_core::camera::Intrinsics;
use voxadapt_core::continual::AdaptConfig;
use voxadapt_core::rng::derive_seed;
use voxadapt_core::scene::{NoiseModel, SceneSpec};
use voxadapt_core::segmenter::{AugmentConfig, TrainConfig};
use voxadapt_core::voxel_map::MapConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Every stream of randomness is derived from this seed; scene seeds in
    /// the specs below act as per-scene salts.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub class_count: usize,
    pub intrinsics: Intrinsics,
    pub pretrain_scenes: Vec<SceneSpec>,
    pub pretrain_frames: usize,
    /// Every `n`-th pre-training frame goes to the test split.
    pub pretrain_test_every: usize,
    pub adaptation_scenes: Vec<SceneSpec>,
    pub adaptation_frames: usize,
    /// Leading fraction of each adaptation trajectory used for mapping and training.
    pub train_fraction: f64,
    pub noise: NoiseModel,
    pub map: MapConfig,
    pub pretrain: TrainConfig,
    pub pretrain_augment: AugmentConfig,
    pub adapt: AdaptConfig,
}

fn specs(salts: std::ops::Range<u64>, classes: usize, albedo_jitter: f64) -> Vec<SceneSpec> {
    salts
        .map(|seed| SceneSpec {
            seed,
            class_count: classes,
            albedo_jitter,
            ..SceneSpec::default()
        })
        .collect()
}

impl RunConfig {
    /// Default benchmark: twelve pre-training rooms, five adaptation rooms.
    pub fn benchmark(seed: u64) -> Self {
        let classes = 8;
        Self {
            seed,
            output_dir: PathBuf::from("out"),
            class_count: classes,
            intrinsics: Intrinsics::default(),
            pretrain_scenes: specs(1..13, classes, 0.03),
            pretrain_frames: 15,
            pretrain_test_every: 10,
            adaptation_scenes: specs(101..106, classes, 0.03),
            adaptation_frames: 50,
            train_fraction: 0.8,
            noise: NoiseModel::benchmark(classes, 0),
            map: MapConfig::with_voxel_size(0.03, classes),
            pretrain: TrainConfig {
                epochs: 60,
                lr_peak: 0.1,
                ..TrainConfig::default()
            },
            pretrain_augment: AugmentConfig::default(),
            adapt: AdaptConfig::default(),
        }
    }

    /// One adaptation scene of 30 frames at 80×40 pixels.
    pub fn smoke(seed: u64) -> Self {
        let mut cfg = Self::benchmark(seed);
        cfg.intrinsics = Intrinsics::with_size(80, 40);
        cfg.pretrain_scenes.truncate(3);
        cfg.pretrain_frames = 12;
        cfg.adaptation_scenes.truncate(1);
        cfg.adaptation_frames = 30;
        cfg.pretrain.epochs = 10;
        cfg.pretrain.warmup_epochs = 2;
        cfg.pretrain.pixels_per_image = 256;
        cfg.adapt.train.epochs = 10;
        cfg.adapt.train.warmup_epochs = 2;
        cfg.adapt.train.pixels_per_image = 256;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        ensure!((2..=255).contains(&self.class_count), "class_count must be in 2..=255");
        self.intrinsics.validate().context("intrinsics")?;
        ensure!(!self.pretrain_scenes.is_empty(), "need at least one pre-training scene");
        ensure!(!self.adaptation_scenes.is_empty(), "need at least one adaptation scene");
        for (i, s) in self.pretrain_scenes.iter().chain(&self.adaptation_scenes).enumerate() {
            s.validate().with_context(|| format!("scene spec {i}"))?;
            ensure!(s.class_count == self.class_count, "scene spec {i}: class count differs from class_count");
        }
        ensure!(self.pretrain_test_every >= 2, "pretrain_test_every must be at least 2");
        ensure!(
            self.pretrain_frames >= self.pretrain_test_every,
            "pre-training scenes need frames in both splits"
        );
        ensure!(
            self.train_fraction > 0.0 && self.train_fraction < 1.0,
            "train_fraction must be in (0, 1)"
        );
        let (train, test) = self.adaptation_split();
        ensure!(train > 0 && test > 0, "adaptation scenes need frames in both splits");
        self.noise.validate().context("noise model")?;
        ensure!(self.noise.classes() == self.class_count, "noise confusion size differs from class_count");
        self.map.validate().context("map config")?;
        ensure!(self.map.class_count == self.class_count, "map class count differs from class_count");
        self.pretrain.validate().context("pretrain config")?;
        self.adapt.validate().context("adapt config")?;
        Ok(())
    }

    /// Train and test frame counts of each adaptation scene.
    pub fn adaptation_split(&self) -> (usize, usize) {
        let train = (self.train_fraction * self.adaptation_frames as f64).round() as usize;
        let train = train.min(self.adaptation_frames);
        (train, self.adaptation_frames - train)
    }

    pub fn seed_for(&self, tags: &[u64]) -> u64 {
        derive_seed(self.seed, tags)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_json() + "\n").with_context(|| format!("writing {}", path.display()))
    }
}
