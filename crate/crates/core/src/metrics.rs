//! Segmentation metrics: confusion matrix, total accuracy and mIoU, plus the
//! map-level mean confidence.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::{LabelImage, UNDEFINED};
use crate::math::Vec3;

/// `counts[pred * classes + gt]`. Pixels undefined on either side are not counted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, pred: usize, gt: usize) -> u64 {
        self.counts[pred * self.classes + gt]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn add_pixel(&mut self, pred: u8, gt: u8) -> Result<()> {
        if pred == UNDEFINED || gt == UNDEFINED {
            return Ok(());
        }
        for l in [pred, gt] {
            if usize::from(l) >= self.classes {
                return Err(Error::ClassOutOfRange {
                    class: u32::from(l),
                    classes: self.classes,
                });
            }
        }
        self.counts[usize::from(pred) * self.classes + usize::from(gt)] += 1;
        Ok(())
    }

    /// Adds the per-pixel counts of one image pair.
    pub fn accumulate(&mut self, pred: &LabelImage, gt: &LabelImage) -> Result<()> {
        pred.ensure_dims(gt.dims())?;
        for (&p, &g) in pred.as_slice().iter().zip(gt.as_slice()) {
            self.add_pixel(p, g)?;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.classes, other.classes, "confusion matrices of different size");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    /// Fraction of evaluated pixels on the diagonal; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let trace: u64 = (0..self.classes).map(|c| self.get(c, c)).sum();
        trace as f64 / total as f64
    }

    /// IoU of each class, `None` for classes absent from both prediction and
    /// ground truth.
    pub fn class_iou(&self) -> Vec<Option<f64>> {
        (0..self.classes)
            .map(|c| {
                let tp = self.get(c, c);
                let predicted: u64 = (0..self.classes).map(|g| self.get(c, g)).sum();
                let actual: u64 = (0..self.classes).map(|p| self.get(p, c)).sum();
                let union = predicted + actual - tp;
                (union > 0).then(|| tp as f64 / union as f64)
            })
            .collect()
    }

    /// Mean IoU over classes present in prediction or ground truth; 0 when none are.
    pub fn miou(&self) -> f64 {
        let ious: Vec<f64> = self.class_iou().into_iter().flatten().collect();
        if ious.is_empty() {
            0.0
        } else {
            ious.iter().sum::<f64>() / ious.len() as f64
        }
    }
}

/// Accuracy and mIoU of a set of prediction/ground-truth pairs.
pub fn evaluate<'a>(
    classes: usize,
    pairs: impl IntoIterator<Item = (&'a LabelImage, &'a LabelImage)>,
) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(classes);
    for (pred, gt) in pairs {
        cm.accumulate(pred, gt)?;
    }
    Ok(cm)
}

/// Mean max-posterior over a confidence field; 0 when empty.
pub fn mean_map_confidence(field: &[(Vec3, f64)]) -> f64 {
    if field.is_empty() {
        return 0.0;
    }
    field.iter().map(|(_, c)| c).sum::<f64>() / field.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Image;

    fn img(v: &[u8]) -> LabelImage {
        Image::from_vec(2, 2, v.to_vec()).unwrap()
    }

    #[test]
    fn hand_enumerated_example() {
        let mut cm = ConfusionMatrix::new(3);
        cm.accumulate(&img(&[0, 1, 1, 2]), &img(&[0, 1, 2, 2])).unwrap();
        assert_eq!(cm.get(0, 0), 1);
        assert_eq!(cm.get(1, 1), 1);
        assert_eq!(cm.get(1, 2), 1);
        assert_eq!(cm.get(2, 2), 1);
        assert_eq!(cm.total(), 4);
        assert_eq!(cm.accuracy(), 0.75);
        let iou = cm.class_iou();
        assert_eq!(iou, vec![Some(1.0), Some(0.5), Some(0.5)]);
        assert!((cm.miou() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_prediction() {
        let mut cm = ConfusionMatrix::new(8);
        let a = img(&[3, 3, 3, 3]);
        cm.accumulate(&a, &a).unwrap();
        assert_eq!(cm.accuracy(), 1.0);
        // Only class 3 is present.
        assert_eq!(cm.miou(), 1.0);
        let off_diagonal: u64 = (0..8)
            .flat_map(|p| (0..8).map(move |g| (p, g)))
            .filter(|(p, g)| p != g)
            .map(|(p, g)| cm.get(p, g))
            .sum();
        assert_eq!(off_diagonal, 0);
    }

    #[test]
    fn undefined_pixels_are_skipped() {
        let mut cm = ConfusionMatrix::new(3);
        cm.accumulate(&img(&[0, 1, 2, 0]), &img(&[UNDEFINED; 4])).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(3));
        cm.accumulate(&img(&[UNDEFINED, 1, 2, 0]), &img(&[0, 1, 2, 0])).unwrap();
        assert_eq!(cm.total(), 3);
    }

    #[test]
    fn empty_conventions() {
        let cm = ConfusionMatrix::new(4);
        assert_eq!(cm.accuracy(), 0.0);
        assert_eq!(cm.miou(), 0.0);
        assert_eq!(mean_map_confidence(&[]), 0.0);
    }

    #[test]
    fn errors() {
        let mut cm = ConfusionMatrix::new(3);
        let small = Image::filled(1, 1, 0u8);
        assert!(matches!(
            cm.accumulate(&small, &img(&[0; 4])),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            cm.accumulate(&img(&[5, 0, 0, 0]), &img(&[0; 4])),
            Err(Error::ClassOutOfRange { .. })
        ));
    }

    #[test]
    fn mean_confidence() {
        let f = [(Vec3::ZERO, 0.9), (Vec3::ZERO, 0.5)];
        assert!((mean_map_confidence(&f) - 0.7).abs() < 1e-15);
        assert_eq!(mean_map_confidence(&[(Vec3::ZERO, 1.0); 3]), 1.0);
    }
}
