use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::{is_valid_depth, LabelImage, UNDEFINED};
use crate::metrics::{mean_map_confidence, ConfusionMatrix};
use crate::rng;
use crate::scene::Frame;
use crate::segmenter::{featurize, featurize_frame, predict_labels, ClassifierParams, Sample};
use crate::surface::{build_bvh, extract_mesh, render_pseudo_labels, PseudoLabelImage};
use crate::voxel_map::{integrate_frame, MapConfig, SemanticVoxelMap};

use super::{adapt, AdaptConfig, AdaptReport, Metrics, ReplayBuffer, ReportRow};

/// Frames of one scene split into the mapped/trained part and the held-out
/// part, with the initial per-frame predictions of each.
#[derive(Debug, Clone, Copy)]
pub struct SceneSplit<'a> {
    pub train: &'a [Frame],
    pub test: &'a [Frame],
    pub train_pred: &'a [LabelImage],
    pub test_pred: &'a [LabelImage],
}

#[derive(Debug, Clone, Copy)]
pub struct IterateContext<'a> {
    pub map: &'a MapConfig,
    pub adapt: &'a AdaptConfig,
    pub buffer: &'a ReplayBuffer,
    /// Ground-truth samples of the pre-training test split.
    pub gen_test: &'a [Sample],
    pub seed: u64,
}

/// Intermediate products of one iteration.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    /// Map fused from this iteration's predictions.
    pub map: SemanticVoxelMap,
    pub pseudo: Vec<PseudoLabelImage>,
    /// Network after adapting on `pseudo`.
    pub params: ClassifierParams,
}

#[derive(Debug, Clone)]
pub struct IterateOutcome {
    pub report: AdaptReport,
    pub iterations: Vec<IterationRecord>,
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            expected: (expected, 1),
            actual: (actual, 1),
        });
    }
    Ok(())
}

/// Integrates every frame with its labels into a fresh map.
pub fn fuse_frames(cfg: &MapConfig, frames: &[Frame], labels: &[LabelImage]) -> Result<SemanticVoxelMap> {
    check_len(frames.len(), labels.len())?;
    let mut map = SemanticVoxelMap::new(*cfg)?;
    for (f, l) in frames.iter().zip(labels) {
        integrate_frame(&mut map, &f.depth, l, &f.pose, &f.intrinsics)?;
    }
    Ok(map)
}

/// Renders pseudo-labels for every frame from the surface of `map`.
pub fn render_pseudo_set(
    map: &SemanticVoxelMap,
    frames: &[Frame],
    fallback: &[LabelImage],
) -> Result<Vec<PseudoLabelImage>> {
    check_len(frames.len(), fallback.len())?;
    let bvh = build_bvh(&extract_mesh(map));
    frames
        .iter()
        .zip(fallback)
        .map(|(f, fb)| render_pseudo_labels(map, &bvh, &f.pose, &f.intrinsics, fb, false))
        .collect()
}

/// Network predictions; pixels without valid depth stay `UNDEFINED`.
pub fn predict_frames(params: &ClassifierParams, frames: &[Frame]) -> Result<Vec<LabelImage>> {
    frames
        .iter()
        .map(|f| {
            let desc = featurize_frame(f, params.featurizer())?;
            let mut labels = predict_labels(params, &desc);
            for (l, &d) in labels.as_mut_slice().iter_mut().zip(f.depth.as_slice()) {
                if !is_valid_depth(d) {
                    *l = UNDEFINED;
                }
            }
            Ok(labels)
        })
        .collect()
}

/// Accuracy and mIoU of `preds` against the frames' ground truth.
pub fn frame_metrics(classes: usize, preds: &[LabelImage], frames: &[Frame]) -> Result<Metrics> {
    check_len(frames.len(), preds.len())?;
    let mut cm = ConfusionMatrix::new(classes);
    for (p, f) in preds.iter().zip(frames) {
        cm.accumulate(p, &f.gt_labels)?;
    }
    Ok(Metrics::from(&cm))
}

/// Accuracy and mIoU of the network on ground-truth samples.
pub fn sample_metrics(params: &ClassifierParams, samples: &[Sample]) -> Result<Metrics> {
    let mut cm = ConfusionMatrix::new(params.classes());
    for s in samples {
        let desc = featurize(&s.features, &s.depth, params.featurizer())?;
        cm.accumulate(&predict_labels(params, &desc), &s.labels)?;
    }
    Ok(Metrics::from(&cm))
}

pub fn map_confidence(map: &SemanticVoxelMap) -> f64 {
    mean_map_confidence(&map.confidence_field())
}

/// Training samples carrying the rendered pseudo-labels.
pub fn pseudo_samples(frames: &[Frame], pseudo: &[PseudoLabelImage]) -> Result<Vec<Sample>> {
    check_len(frames.len(), pseudo.len())?;
    frames
        .iter()
        .zip(pseudo)
        .map(|(f, p)| Sample::from_frame(f, p.labels.clone()))
        .collect()
}

/// Runs `cfg.iterations` rounds of fuse → render → adapt starting from the
/// initial predictions, reporting `i-Pred` and `i-Pse` rows.
pub fn iterate(theta0: &ClassifierParams, split: SceneSplit<'_>, ctx: IterateContext<'_>) -> Result<IterateOutcome> {
    ctx.adapt.validate()?;
    ctx.map.validate()?;
    check_len(split.train.len(), split.train_pred.len())?;
    check_len(split.test.len(), split.test_pred.len())?;
    let classes = theta0.classes();

    let mut map = fuse_frames(ctx.map, split.train, split.train_pred)?;
    let mut first = ReportRow::new("1-Pred");
    first.train = Some(frame_metrics(classes, split.train_pred, split.train)?);
    first.test = Some(frame_metrics(classes, split.test_pred, split.test)?);
    first.generalization = Some(sample_metrics(theta0, ctx.gen_test)?);
    first.confidence = Some(map_confidence(&map));
    let mut rows = alloc::vec![first];

    let mut labels = split.train_pred.to_vec();
    let mut params = theta0.clone();
    let mut iterations = Vec::with_capacity(ctx.adapt.iterations);
    for i in 1..=ctx.adapt.iterations {
        let pseudo = render_pseudo_set(&map, split.train, &labels)?;
        let pseudo_labels: Vec<LabelImage> = pseudo.iter().map(|p| p.labels.clone()).collect();
        let mut pse = ReportRow::new(format!("{i}-Pse"));
        pse.train = Some(frame_metrics(classes, &pseudo_labels, split.train)?);
        rows.push(pse);

        let samples = pseudo_samples(split.train, &pseudo)?;
        params = adapt(&params, &samples, ctx.buffer, ctx.adapt, rng::derive_seed(ctx.seed, &[i as u64]))?;

        labels = predict_frames(&params, split.train)?;
        let next_map = fuse_frames(ctx.map, split.train, &labels)?;
        let mut pred = ReportRow::new(format!("{}-Pred", i + 1));
        pred.train = Some(frame_metrics(classes, &labels, split.train)?);
        pred.test = Some(frame_metrics(classes, &predict_frames(&params, split.test)?, split.test)?);
        pred.generalization = Some(sample_metrics(&params, ctx.gen_test)?);
        pred.confidence = Some(map_confidence(&next_map));
        rows.push(pred);

        let used = core::mem::replace(&mut map, next_map);
        iterations.push(IterationRecord {
            map: used,
            pseudo,
            params: params.clone(),
        });
    }
    Ok(IterateOutcome {
        report: AdaptReport { rows },
        iterations,
    })
}
