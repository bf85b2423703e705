use alloc::string::String;
use alloc::vec::Vec;

use crate::metrics::ConfusionMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub acc: f64,
    pub miou: f64,
}

impl From<&ConfusionMatrix> for Metrics {
    fn from(cm: &ConfusionMatrix) -> Self {
        Self {
            acc: cm.accuracy(),
            miou: cm.miou(),
        }
    }
}

/// One arm of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub arm: String,
    /// Labels on the scene's training frames.
    pub train: Option<Metrics>,
    /// Labels on the scene's held-out frames.
    pub test: Option<Metrics>,
    /// Network on the pre-training test split.
    pub generalization: Option<Metrics>,
    /// Mean near-surface voxel confidence of the map fused from this arm's
    /// training-frame labels.
    pub confidence: Option<f64>,
}

impl ReportRow {
    pub fn new(arm: impl Into<String>) -> Self {
        Self {
            arm: arm.into(),
            train: None,
            test: None,
            generalization: None,
            confidence: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdaptReport {
    pub rows: Vec<ReportRow>,
}

impl AdaptReport {
    pub fn row(&self, arm: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.arm == arm)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn mean_metrics<'a>(m: impl Iterator<Item = &'a Metrics> + Clone) -> Option<Metrics> {
    Some(Metrics {
        acc: mean(m.clone().map(|x| x.acc))?,
        miou: mean(m.map(|x| x.miou))?,
    })
}

/// Field-wise mean over the rows that carry each field.
pub fn average_rows(arm: &str, rows: &[&ReportRow]) -> ReportRow {
    ReportRow {
        arm: arm.into(),
        train: mean_metrics(rows.iter().filter_map(|r| r.train.as_ref())),
        test: mean_metrics(rows.iter().filter_map(|r| r.test.as_ref())),
        generalization: mean_metrics(rows.iter().filter_map(|r| r.generalization.as_ref())),
        confidence: mean(rows.iter().filter_map(|r| r.confidence)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn averaging_skips_missing_fields() {
        let mut a = ReportRow::new("x");
        a.test = Some(Metrics { acc: 0.5, miou: 0.2 });
        a.confidence = Some(0.9);
        let mut b = ReportRow::new("x");
        b.test = Some(Metrics { acc: 0.7, miou: 0.4 });
        let avg = average_rows("x", &[&a, &b]);
        let t = avg.test.unwrap();
        assert!((t.acc - 0.6).abs() < 1e-15 && (t.miou - 0.3).abs() < 1e-15);
        assert_eq!(avg.confidence, Some(0.9));
        assert_eq!(avg.train, None);
    }
}
