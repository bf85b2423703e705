//! Results table: CSV and an aligned text layout with one row per arm.

use std::fmt::Write as _;

use voxadapt_core::continual::{average_rows, AdaptReport, Metrics, ReportRow};

#[derive(Debug, Clone, PartialEq)]
pub struct SceneReport {
    pub scene: String,
    pub report: AdaptReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub scenes: Vec<SceneReport>,
}

impl BenchmarkReport {
    /// Arms in first-seen order.
    pub fn arms(&self) -> Vec<String> {
        let mut arms: Vec<String> = Vec::new();
        for s in &self.scenes {
            for r in &s.report.rows {
                if !arms.contains(&r.arm) {
                    arms.push(r.arm.clone());
                }
            }
        }
        arms
    }

    /// Per-arm mean over scenes.
    pub fn average(&self) -> AdaptReport {
        let rows = self
            .arms()
            .iter()
            .map(|arm| {
                let rows: Vec<&ReportRow> = self.scenes.iter().filter_map(|s| s.report.row(arm)).collect();
                average_rows(arm, &rows)
            })
            .collect();
        AdaptReport { rows }
    }

    pub fn row(&self, scene: &str, arm: &str) -> Option<&ReportRow> {
        self.scenes.iter().find(|s| s.scene == scene)?.report.row(arm)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Adaptation metrics of a row: held-out frames when present, else training frames.
pub fn headline(row: &ReportRow) -> Option<(Metrics, &'static str)> {
    row.test.map(|m| (m, "test")).or(row.train.map(|m| (m, "train")))
}

fn csv_row(out: &mut String, scene: &str, row: &ReportRow) {
    let head = headline(row);
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{}",
        row.arm,
        scene,
        head.map(|h| h.1).unwrap_or(""),
        opt(head.map(|h| h.0.acc)),
        opt(head.map(|h| h.0.miou)),
        opt(row.generalization.map(|m| m.acc)),
        opt(row.generalization.map(|m| m.miou)),
        opt(row.confidence),
        opt(row.train.map(|m| m.acc)),
        opt(row.train.map(|m| m.miou)),
    )
    .unwrap();
}

pub fn to_csv(report: &BenchmarkReport) -> String {
    let mut out = String::from("arm,scene,frames,acc,miou,gen_acc,gen_miou,confidence,train_acc,train_miou\n");
    for s in &report.scenes {
        for r in &s.report.rows {
            csv_row(&mut out, &s.scene, r);
        }
    }
    for r in &report.average().rows {
        csv_row(&mut out, "AVG", r);
    }
    out
}

fn pct(v: Option<f64>) -> String {
    v.map(|x| format!("{:.1}", 100.0 * x)).unwrap_or_else(|| "-".into())
}

/// Arms as rows; per-scene Acc/mIoU, their average, generalization and map confidence as columns.
pub fn to_text(report: &BenchmarkReport) -> String {
    let avg = report.average();
    let mut header = vec!["arm".to_string()];
    for s in &report.scenes {
        header.push(format!("{} Acc", s.scene));
        header.push("mIoU".into());
    }
    header.extend(["AVG Acc", "mIoU", "Gen Acc", "mIoU", "Conf"].map(String::from));
    let mut table = vec![header];
    for arm in report.arms() {
        let mut line = vec![arm.clone()];
        for s in &report.scenes {
            let h = s.report.row(&arm).and_then(headline);
            line.push(pct(h.map(|h| h.0.acc)));
            line.push(pct(h.map(|h| h.0.miou)));
        }
        let a = avg.row(&arm).expect("every arm is averaged");
        let h = headline(a);
        line.push(pct(h.map(|h| h.0.acc)));
        line.push(pct(h.map(|h| h.0.miou)));
        line.push(pct(a.generalization.map(|m| m.acc)));
        line.push(pct(a.generalization.map(|m| m.miou)));
        line.push(a.confidence.map(|c| format!("{c:.4}")).unwrap_or_else(|| "-".into()));
        table.push(line);
    }
    let widths: Vec<usize> = (0..table[0].len())
        .map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in table.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (v, &w))| if c == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
            .collect();
        writeln!(out, "{}", cells.join("  ").trim_end()).unwrap();
        if i == 0 {
            writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1))).unwrap();
        }
    }
    out.push_str("Acc/mIoU: held-out frames for Pred and FT arms, training frames for Pse arms.\n");
    out
}
