//! Stage implementations and the end-to-end benchmark.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use voxadapt_core::continual::{
    adapt, build_buffer, frame_metrics, fuse_frames, iterate, map_confidence, predict_frames,
    pseudo_samples, render_pseudo_set, sample_metrics, AdaptReport, IterateContext, ReplayBuffer,
    ReportRow, SceneSplit,
};
use voxadapt_core::metrics::ConfusionMatrix;
use voxadapt_core::rng::derive_seed;
use voxadapt_core::scene::Frame;
use voxadapt_core::segmenter::{pretrain, ClassifierParams, Sample};
use voxadapt_core::surface::{extract_mesh, PseudoLabelImage};
use voxadapt_core::voxel_map::SemanticVoxelMap;
use voxadapt_core::LabelImage;

use crate::config::RunConfig;
use crate::dataset::{load_or_simulate, Dataset, SceneData};
use crate::formats;
use crate::report::{to_csv, to_text, BenchmarkReport, SceneReport};

/// Which replay setting an adaptation run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Replay,
    Finetune,
}

impl Arm {
    fn file_tag(self) -> &'static str {
        match self {
            Arm::Replay => "1",
            Arm::Finetune => "ft",
        }
    }
}

pub fn scene_dir(out: &Path, scene: &str) -> PathBuf {
    out.join("scenes").join(scene)
}

fn theta0_path(out: &Path) -> PathBuf {
    out.join("theta0.bin")
}

fn scene_seed(cfg: &RunConfig, data: &Dataset, scene: &str) -> Result<u64> {
    let k = data
        .adaptation
        .iter()
        .position(|s| s.name == scene)
        .with_context(|| format!("unknown scene {scene}"))?;
    Ok(cfg.seed_for(&[0xAD, k as u64]))
}

fn find_scene<'a>(data: &'a Dataset, scene: &str) -> Result<&'a SceneData> {
    data.scene(scene).with_context(|| format!("unknown scene {scene}"))
}

/// Training and held-out halves of a scene's frames and initial predictions.
fn split<'a>(cfg: &RunConfig, s: &'a SceneData) -> SceneSplit<'a> {
    let n = cfg.adaptation_split().0;
    SceneSplit {
        train: &s.frames[..n],
        test: &s.frames[n..],
        train_pred: &s.predictions[..n],
        test_pred: &s.predictions[n..],
    }
}

pub fn replay_buffer(cfg: &RunConfig, data: &Dataset) -> Result<ReplayBuffer> {
    Ok(build_buffer(&data.a_train(cfg), cfg.adapt.buffer_fraction, cfg.seed_for(&[0xBF]))?)
}

pub fn run_pretrain(cfg: &RunConfig, data: &Dataset) -> Result<ClassifierParams> {
    let train = data.a_train(cfg);
    log::info!("pre-training on {} frames", train.len());
    Ok(pretrain(&train, cfg.class_count, &cfg.pretrain, &cfg.pretrain_augment, cfg.seed_for(&[0x9E]))?)
}

fn write_map_artifacts(dir: &Path, tag: &str, map: &SemanticVoxelMap) -> Result<()> {
    formats::write_map(&dir.join(format!("map_{tag}.bin")), map)?;
    formats::write_ply(&dir.join(format!("mesh_{tag}.ply")), &extract_mesh(map))?;
    let mut csv = String::from("x,y,z,confidence\n");
    for (p, c) in map.confidence_field() {
        writeln!(csv, "{:.4},{:.4},{:.4},{:.6}", p.x, p.y, p.z, c).unwrap();
    }
    fs::write(dir.join(format!("confidence_{tag}.csv")), csv)?;
    Ok(())
}

fn write_pseudo(dir: &Path, frames: &[Frame], pseudo: &[PseudoLabelImage]) -> Result<()> {
    for (f, p) in frames.iter().zip(pseudo) {
        formats::write_labels(&dir.join(format!("{:06}_labels.png", f.index)), &p.labels)?;
        formats::write_source_mask(&dir.join(format!("{:06}_source.png", f.index)), &p.source)?;
    }
    Ok(())
}

fn read_pseudo_labels(dir: &Path, frames: &[Frame]) -> Result<Vec<LabelImage>> {
    frames
        .iter()
        .map(|f| formats::read_labels(&dir.join(format!("{:06}_labels.png", f.index))))
        .collect()
}

/// Per-frame accuracy rows `scene,arm,frame,split,acc,miou`.
fn frame_rows(out: &mut String, classes: usize, scene: &str, arm: &str, split: &str, frames: &[Frame], labels: &[LabelImage]) -> Result<()> {
    for (f, l) in frames.iter().zip(labels) {
        let mut cm = ConfusionMatrix::new(classes);
        cm.accumulate(l, &f.gt_labels)?;
        writeln!(out, "{scene},{arm},{},{split},{:.6},{:.6}", f.index, cm.accuracy(), cm.miou()).unwrap();
    }
    Ok(())
}

/// Every arm of one scene. Artifacts go below `out/scenes/<scene>/`.
#[allow(clippy::too_many_arguments)]
pub fn run_scene(
    cfg: &RunConfig,
    data: &Dataset,
    scene: &str,
    theta0: &ClassifierParams,
    buffer: &ReplayBuffer,
    gen_test: &[Sample],
    out: &Path,
    per_frame: &mut String,
) -> Result<AdaptReport> {
    let s = find_scene(data, scene)?;
    let sp = split(cfg, s);
    let seed = scene_seed(cfg, data, scene)?;
    let dir = scene_dir(out, scene);
    let classes = cfg.class_count;
    log::info!("{scene}: iterating ({} rounds)", cfg.adapt.iterations);
    let ctx = IterateContext {
        map: &cfg.map,
        adapt: &cfg.adapt,
        buffer,
        gen_test,
        seed,
    };
    let outcome = iterate(theta0, sp, ctx).with_context(|| format!("{scene}: adaptation loop"))?;

    log::info!("{scene}: ground-truth and fine-tuning arms");
    let gt_labels: Vec<LabelImage> = sp.train.iter().map(|f| f.gt_labels.clone()).collect();
    let gt_map = fuse_frames(&cfg.map, sp.train, &gt_labels)?;
    let gt_pseudo = render_pseudo_set(&gt_map, sp.train, &gt_labels)?;
    let gt_pseudo_labels: Vec<LabelImage> = gt_pseudo.iter().map(|p| p.labels.clone()).collect();
    let mut gt_row = ReportRow::new("GT-Pse");
    gt_row.train = Some(frame_metrics(classes, &gt_pseudo_labels, sp.train)?);
    gt_row.confidence = Some(map_confidence(&gt_map));

    let first = &outcome.iterations[0];
    let samples = pseudo_samples(sp.train, &first.pseudo)?;
    let ft = adapt(theta0, &samples, &ReplayBuffer::empty(), &cfg.adapt.finetune(), derive_seed(seed, &[1]))
        .with_context(|| format!("{scene}: fine-tuning arm"))?;
    let ft_train = predict_frames(&ft, sp.train)?;
    let ft_test = predict_frames(&ft, sp.test)?;
    let mut ft_row = ReportRow::new("2-FT");
    ft_row.train = Some(frame_metrics(classes, &ft_train, sp.train)?);
    ft_row.test = Some(frame_metrics(classes, &ft_test, sp.test)?);
    ft_row.generalization = Some(sample_metrics(&ft, gen_test)?);
    ft_row.confidence = Some(map_confidence(&fuse_frames(&cfg.map, sp.train, &ft_train)?));

    let mut rows = outcome.report.rows.clone();
    rows.insert(2, gt_row);
    rows.insert(3, ft_row);

    // Artifacts.
    fs::create_dir_all(&dir)?;
    for (i, it) in outcome.iterations.iter().enumerate() {
        let tag = (i + 1).to_string();
        write_map_artifacts(&dir, &tag, &it.map)?;
        write_pseudo(&dir.join(format!("pseudo_{tag}")), sp.train, &it.pseudo)?;
        formats::write_params(&dir.join(format!("theta_{tag}.bin")), &it.params)?;
    }
    write_map_artifacts(&dir, "gt", &gt_map)?;
    write_pseudo(&dir.join("pseudo_gt"), sp.train, &gt_pseudo)?;
    formats::write_params(&dir.join("theta_ft.bin"), &ft)?;

    frame_rows(per_frame, classes, scene, "1-Pred", "train", sp.train, sp.train_pred)?;
    frame_rows(per_frame, classes, scene, "1-Pred", "test", sp.test, sp.test_pred)?;
    for (i, it) in outcome.iterations.iter().enumerate() {
        let labels: Vec<LabelImage> = it.pseudo.iter().map(|p| p.labels.clone()).collect();
        frame_rows(per_frame, classes, scene, &format!("{}-Pse", i + 1), "train", sp.train, &labels)?;
        let arm = format!("{}-Pred", i + 2);
        frame_rows(per_frame, classes, scene, &arm, "train", sp.train, &predict_frames(&it.params, sp.train)?)?;
        frame_rows(per_frame, classes, scene, &arm, "test", sp.test, &predict_frames(&it.params, sp.test)?)?;
    }
    frame_rows(per_frame, classes, scene, "GT-Pse", "train", sp.train, &gt_pseudo_labels)?;
    frame_rows(per_frame, classes, scene, "2-FT", "train", sp.train, &ft_train)?;
    frame_rows(per_frame, classes, scene, "2-FT", "test", sp.test, &ft_test)?;
    Ok(AdaptReport { rows })
}

/// Full benchmark: dataset, pre-training, every arm of every (or one) scene,
/// report files. Writes the configuration used into `out/config.json`.
pub fn run_pipeline(cfg: &RunConfig, out: &Path, only_scene: Option<&str>) -> Result<BenchmarkReport> {
    cfg.validate().context("configuration")?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    cfg.save(&out.join("config.json"))?;
    let data = load_or_simulate(out, cfg).context("stage simulate")?;
    let theta0 = run_pretrain(cfg, &data).context("stage pretrain")?;
    formats::write_params(&theta0_path(out), &theta0)?;
    let buffer = replay_buffer(cfg, &data)?;
    let gen_test = data.a_test(cfg);

    let names: Vec<String> = match only_scene {
        Some(s) => vec![find_scene(&data, s)?.name.clone()],
        None => data.adaptation.iter().map(|s| s.name.clone()).collect(),
    };
    let mut per_frame = String::from("scene,arm,frame,split,acc,miou\n");
    let mut scenes = Vec::new();
    for name in names {
        let report = run_scene(cfg, &data, &name, &theta0, &buffer, &gen_test, out, &mut per_frame)
            .with_context(|| format!("stage pipeline, scene {name}"))?;
        scenes.push(SceneReport { scene: name, report });
    }
    let report = BenchmarkReport { scenes };
    fs::write(out.join("report.csv"), to_csv(&report))?;
    fs::write(out.join("report.txt"), to_text(&report))?;
    fs::write(out.join("frames.csv"), per_frame)?;
    Ok(report)
}

/// Loads `theta0.bin`, pre-training first when it is missing.
fn load_theta0(cfg: &RunConfig, data: &Dataset, out: &Path) -> Result<ClassifierParams> {
    let path = theta0_path(out);
    if path.exists() {
        return formats::read_params(&path);
    }
    let theta = run_pretrain(cfg, data)?;
    formats::write_params(&path, &theta)?;
    Ok(theta)
}

pub fn cmd_pretrain(cfg: &RunConfig, out: &Path) -> Result<ClassifierParams> {
    let data = load_or_simulate(out, cfg)?;
    let theta = run_pretrain(cfg, &data)?;
    formats::write_params(&theta0_path(out), &theta)?;
    Ok(theta)
}

/// Fuses the scene's training frames with their initial predictions into `map_1.bin`.
pub fn cmd_fuse(cfg: &RunConfig, out: &Path, scene: &str) -> Result<SemanticVoxelMap> {
    let data = load_or_simulate(out, cfg)?;
    let sp = split(cfg, find_scene(&data, scene)?);
    let map = fuse_frames(&cfg.map, sp.train, sp.train_pred)?;
    let dir = scene_dir(out, scene);
    fs::create_dir_all(&dir)?;
    write_map_artifacts(&dir, "1", &map)?;
    Ok(map)
}

/// Renders pseudo-labels of the training frames from `map_1.bin` into `pseudo_1/`.
pub fn cmd_render_pseudo(cfg: &RunConfig, out: &Path, scene: &str) -> Result<Vec<PseudoLabelImage>> {
    let data = load_or_simulate(out, cfg)?;
    let sp = split(cfg, find_scene(&data, scene)?);
    let dir = scene_dir(out, scene);
    let map = formats::read_map(&dir.join("map_1.bin")).context("run the fuse stage first")?;
    let pseudo = render_pseudo_set(&map, sp.train, sp.train_pred)?;
    write_pseudo(&dir.join("pseudo_1"), sp.train, &pseudo)?;
    Ok(pseudo)
}

/// Adapts `theta0.bin` on `pseudo_1/` and writes `theta_1.bin` (replay) or `theta_ft.bin`.
pub fn cmd_adapt(cfg: &RunConfig, out: &Path, scene: &str, arm: Arm) -> Result<ClassifierParams> {
    let data = load_or_simulate(out, cfg)?;
    let sp = split(cfg, find_scene(&data, scene)?);
    let seed = scene_seed(cfg, &data, scene)?;
    let dir = scene_dir(out, scene);
    let labels = read_pseudo_labels(&dir.join("pseudo_1"), sp.train).context("run the render-pseudo stage first")?;
    let samples = sp
        .train
        .iter()
        .zip(labels)
        .map(|(f, l)| Sample::from_frame(f, l))
        .collect::<voxadapt_core::Result<Vec<_>>>()?;
    let theta0 = load_theta0(cfg, &data, out)?;
    let (buffer, adapt_cfg) = match arm {
        Arm::Replay => (replay_buffer(cfg, &data)?, cfg.adapt.clone()),
        Arm::Finetune => (ReplayBuffer::empty(), cfg.adapt.finetune()),
    };
    let theta = adapt(&theta0, &samples, &buffer, &adapt_cfg, derive_seed(seed, &[1]))?;
    formats::write_params(&dir.join(format!("theta_{}.bin", arm.file_tag())), &theta)?;
    Ok(theta)
}

/// Frame key of a label file: its leading digits, or the whole stem.
fn frame_key(path: &Path) -> Option<String> {
    let stem = path.file_stem()?.to_str()?;
    let digits: String = stem.chars().take_while(char::is_ascii_digit).collect();
    Some(if digits.is_empty() { stem.to_string() } else { digits })
}

fn label_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "png") {
            // Source-mask sidecars are not label images.
            if path.file_stem().and_then(|s| s.to_str()).is_some_and(|s| s.ends_with("_source")) {
                continue;
            }
            if let Some(k) = frame_key(&path) {
                files.push((k, path));
            }
        }
    }
    files.sort();
    Ok(files)
}

/// Confusion matrix of every prediction image against the ground-truth image
/// of the same frame. Both directories must hold the same frame set.
pub fn cmd_eval(pred_dir: &Path, gt_dir: &Path, classes: usize) -> Result<ConfusionMatrix> {
    let pred = label_files(pred_dir)?;
    let gt = label_files(gt_dir)?;
    let pk: Vec<&String> = pred.iter().map(|p| &p.0).collect();
    let gk: Vec<&String> = gt.iter().map(|p| &p.0).collect();
    if pk != gk {
        let missing: Vec<&&String> = gk.iter().filter(|k| !pk.contains(k)).collect();
        let extra: Vec<&&String> = pk.iter().filter(|k| !gk.contains(k)).collect();
        bail!("frame sets differ: missing predictions {missing:?}, unmatched predictions {extra:?}");
    }
    if pk.is_empty() {
        bail!("no label images in {}", pred_dir.display());
    }
    let mut cm = ConfusionMatrix::new(classes);
    for ((_, p), (_, g)) in pred.iter().zip(&gt) {
        cm.accumulate(&formats::read_labels(p)?, &formats::read_labels(g)?)
            .with_context(|| format!("{} vs {}", p.display(), g.display()))?;
    }
    Ok(cm)
}

pub fn format_metrics(cm: &ConfusionMatrix) -> String {
    let mut s = format!("pixels {}\nacc {:.6}\nmiou {:.6}\nconfusion (rows predicted, columns true)\n", cm.total(), cm.accuracy(), cm.miou());
    for p in 0..cm.classes() {
        let row: Vec<String> = (0..cm.classes()).map(|g| cm.get(p, g).to_string()).collect();
        writeln!(s, "{}", row.join(" ")).unwrap();
    }
    s
}
