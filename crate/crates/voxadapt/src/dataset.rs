//! Synthetic dataset generation and its directory layout.
//!
//! ```text
//! <out>/dataset/pretrain/A<k>/{scene.txt, poses.txt, NNNNNN_{features,depth,gt}.png}
//! <out>/dataset/adapt/scene<k>/{scene.txt, poses.txt, NNNNNN_{features,depth,gt,pred}.png}
//! ```

use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use voxadapt_core::scene::{build_scene, corrupt_labels, render_frame, sample_trajectory, Frame, Scene, SceneSpec};
use voxadapt_core::segmenter::Sample;
use voxadapt_core::LabelImage;

use crate::config::RunConfig;
use crate::formats;

const PRETRAIN: u64 = 0xA;
const ADAPT: u64 = 0xB;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneData {
    pub name: String,
    pub scene: Scene,
    pub frames: Vec<Frame>,
    /// Simulated pre-trained predictions (1-Pred); empty for pre-training scenes.
    pub predictions: Vec<LabelImage>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub pretrain: Vec<SceneData>,
    pub adaptation: Vec<SceneData>,
}

fn simulate_scene(cfg: &RunConfig, group: u64, index: usize, spec: &SceneSpec, frames: usize) -> Result<(Scene, Vec<Frame>)> {
    let spec = SceneSpec {
        seed: cfg.seed_for(&[group, spec.seed]),
        ..spec.clone()
    };
    let scene = build_scene(&spec)?;
    let poses = sample_trajectory(&scene, frames, cfg.seed_for(&[group, index as u64, 0x7A]))?;
    let frames = poses
        .iter()
        .enumerate()
        .map(|(i, pose)| render_frame(&scene, pose, &cfg.intrinsics, i).quantized())
        .collect();
    Ok((scene, frames))
}

/// Builds every scene, trajectory and frame of the configuration.
pub fn simulate(cfg: &RunConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut pretrain = Vec::new();
    for (k, spec) in cfg.pretrain_scenes.iter().enumerate() {
        let (scene, frames) = simulate_scene(cfg, PRETRAIN, k, spec, cfg.pretrain_frames)
            .with_context(|| format!("pre-training scene {}", k + 1))?;
        pretrain.push(SceneData {
            name: format!("A{}", k + 1),
            scene,
            frames,
            predictions: Vec::new(),
        });
    }
    let mut adaptation = Vec::new();
    for (k, spec) in cfg.adaptation_scenes.iter().enumerate() {
        let (scene, frames) = simulate_scene(cfg, ADAPT, k, spec, cfg.adaptation_frames)
            .with_context(|| format!("adaptation scene {}", k + 1))?;
        let mut noise = cfg.noise.clone();
        noise.seed = cfg.seed_for(&[0x401, cfg.noise.seed, k as u64]);
        let predictions = frames
            .iter()
            .map(|f| corrupt_labels(f, &noise))
            .collect::<voxadapt_core::Result<Vec<_>>>()?;
        adaptation.push(SceneData {
            name: format!("scene{}", k + 1),
            scene,
            frames,
            predictions,
        });
    }
    Ok(Dataset { pretrain, adaptation })
}

impl Dataset {
    fn pretrain_split(&self, cfg: &RunConfig, test: bool) -> Vec<Sample> {
        let every = cfg.pretrain_test_every;
        self.pretrain
            .iter()
            .flat_map(|s| &s.frames)
            .filter(|f| (f.index % every == every - 1) == test)
            .map(|f| Sample::from_frame(f, f.gt_labels.clone()).expect("frame images agree"))
            .collect()
    }

    pub fn a_train(&self, cfg: &RunConfig) -> Vec<Sample> {
        self.pretrain_split(cfg, false)
    }

    pub fn a_test(&self, cfg: &RunConfig) -> Vec<Sample> {
        self.pretrain_split(cfg, true)
    }

    pub fn scene(&self, name: &str) -> Option<&SceneData> {
        self.adaptation.iter().find(|s| s.name == name)
    }
}

pub fn dataset_dir(out: &Path) -> PathBuf {
    out.join("dataset")
}

fn frame_path(dir: &Path, index: usize, kind: &str) -> PathBuf {
    dir.join(format!("{index:06}_{kind}.png"))
}

fn write_scene_dir(dir: &Path, data: &SceneData) -> Result<()> {
    formats::write_scene(&dir.join("scene.txt"), &data.scene)?;
    let poses: Vec<_> = data.frames.iter().map(|f| f.pose).collect();
    formats::write_poses(&dir.join("poses.txt"), &poses)?;
    for f in &data.frames {
        formats::write_features(&frame_path(dir, f.index, "features"), &f.features)?;
        formats::write_depth(&frame_path(dir, f.index, "depth"), &f.depth)?;
        formats::write_labels(&frame_path(dir, f.index, "gt"), &f.gt_labels)?;
    }
    for (i, p) in data.predictions.iter().enumerate() {
        formats::write_labels(&frame_path(dir, i, "pred"), p)?;
    }
    Ok(())
}

pub fn write_dataset(out: &Path, data: &Dataset) -> Result<()> {
    let root = dataset_dir(out);
    for s in &data.pretrain {
        write_scene_dir(&root.join("pretrain").join(&s.name), s)?;
    }
    for s in &data.adaptation {
        write_scene_dir(&root.join("adapt").join(&s.name), s)?;
    }
    Ok(())
}

fn read_scene_dir(cfg: &RunConfig, dir: &Path, frames: usize, with_pred: bool) -> Result<(Vec<Frame>, Vec<LabelImage>)> {
    let poses = formats::read_poses(&dir.join("poses.txt"))?;
    ensure!(poses.len() == frames, "{}: expected {frames} poses, found {}", dir.display(), poses.len());
    let mut out = Vec::with_capacity(frames);
    let mut preds = Vec::new();
    for (index, pose) in poses.into_iter().enumerate() {
        let frame = Frame {
            index,
            features: formats::read_features(&frame_path(dir, index, "features"))?,
            depth: formats::read_depth(&frame_path(dir, index, "depth"))?,
            gt_labels: formats::read_labels(&frame_path(dir, index, "gt"))?,
            pose,
            intrinsics: cfg.intrinsics,
        };
        let dims = cfg.intrinsics.dims();
        frame.features.ensure_dims(dims)?;
        frame.depth.ensure_dims(dims)?;
        frame.gt_labels.ensure_dims(dims)?;
        if with_pred {
            let p = formats::read_labels(&frame_path(dir, index, "pred"))?;
            p.ensure_dims(dims)?;
            preds.push(p);
        }
        out.push(frame);
    }
    Ok((out, preds))
}

/// Reads a dataset written by [`write_dataset`]. Scene geometry is rebuilt
/// from the configuration; images and poses come from disk.
pub fn read_dataset(out: &Path, cfg: &RunConfig) -> Result<Dataset> {
    cfg.validate()?;
    let root = dataset_dir(out);
    let mut pretrain = Vec::new();
    for (k, spec) in cfg.pretrain_scenes.iter().enumerate() {
        let name = format!("A{}", k + 1);
        let scene = build_scene(&SceneSpec {
            seed: cfg.seed_for(&[PRETRAIN, spec.seed]),
            ..spec.clone()
        })?;
        let (frames, _) = read_scene_dir(cfg, &root.join("pretrain").join(&name), cfg.pretrain_frames, false)?;
        pretrain.push(SceneData { name, scene, frames, predictions: Vec::new() });
    }
    let mut adaptation = Vec::new();
    for (k, spec) in cfg.adaptation_scenes.iter().enumerate() {
        let name = format!("scene{}", k + 1);
        let scene = build_scene(&SceneSpec {
            seed: cfg.seed_for(&[ADAPT, spec.seed]),
            ..spec.clone()
        })?;
        let (frames, predictions) =
            read_scene_dir(cfg, &root.join("adapt").join(&name), cfg.adaptation_frames, true)?;
        adaptation.push(SceneData { name, scene, frames, predictions });
    }
    Ok(Dataset { pretrain, adaptation })
}

/// Loads the dataset from `out` if present, otherwise simulates and writes it.
pub fn load_or_simulate(out: &Path, cfg: &RunConfig) -> Result<Dataset> {
    if dataset_dir(out).is_dir() {
        log::info!("reading dataset from {}", dataset_dir(out).display());
        read_dataset(out, cfg)
    } else {
        log::info!("simulating dataset into {}", dataset_dir(out).display());
        let data = simulate(cfg)?;
        write_dataset(out, &data)?;
        Ok(data)
    }
}
