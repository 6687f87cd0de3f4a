//! Confusion-matrix accounting and report rendering: per-class percentages
//! normalized per true-label column, pooled aggregation across training
//! iterations, and the plain-text / CSV / JSON report formats.

use crate::mlp::IterationRecord;
use crate::signal::ChannelKind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of gesture classes (digits 0-9).
pub const CLASS_COUNT: usize = 10;

/// Published hardware-study accuracies (mean %, std) per channel, shown in
/// comparison reports as reference annotations only; synthetic-data runs are
/// not expected to reproduce them.
pub const REFERENCE_RESULTS: [(ChannelKind, f64, f64); 3] = [
    (ChannelKind::Acceleration, 51.46, 28.60),
    (ChannelKind::Velocity, 63.68, 28.79),
    (ChannelKind::Trajectory, 59.15, 27.86),
];

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("true class {0} has no samples (empty confusion column)")]
    EmptyClass(usize),
    #[error("no iteration records")]
    NoRecords,
    #[error("incompatible report: {0}")]
    IncompatibleReport(String),
}

/// 10x10 count matrix; rows are predicted classes, columns true classes.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: [[u64; CLASS_COUNT]; CLASS_COUNT],
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, predicted: usize, truth: usize) {
        self.counts[predicted][truth] += 1;
    }

    pub fn counts(&self) -> &[[u64; CLASS_COUNT]; CLASS_COUNT] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn column_total(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }

    /// Overall (sample-weighted) accuracy: trace over grand total.
    pub fn accuracy(&self) -> f64 {
        let correct: u64 = (0..CLASS_COUNT).map(|i| self.counts[i][i]).sum();
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        }
    }

    /// Each column divided by its total, times 100.
    pub fn normalize_columns(&self) -> Result<[[f64; CLASS_COUNT]; CLASS_COUNT], EvalError> {
        let mut out = [[0.0; CLASS_COUNT]; CLASS_COUNT];
        for class in 0..CLASS_COUNT {
            let total = self.column_total(class);
            if total == 0 {
                return Err(EvalError::EmptyClass(class));
            }
            for pred in 0..CLASS_COUNT {
                out[pred][class] = 100.0 * self.counts[pred][class] as f64 / total as f64;
            }
        }
        Ok(out)
    }

    /// Mean over true classes of per-class recall (diagonal of the
    /// column-normalized matrix), in percent.
    pub fn macro_recall_pct(&self) -> Result<f64, EvalError> {
        let pct = self.normalize_columns()?;
        Ok((0..CLASS_COUNT).map(|i| pct[i][i]).sum::<f64>() / CLASS_COUNT as f64)
    }
}

/// Column-normalized percentages of counts pooled across all records.
pub fn aggregate(records: &[IterationRecord]) -> Result<[[f64; CLASS_COUNT]; CLASS_COUNT], EvalError> {
    if records.is_empty() {
        return Err(EvalError::NoRecords);
    }
    let mut pooled = ConfusionMatrix::new();
    for rec in records {
        for pred in 0..CLASS_COUNT {
            for truth in 0..CLASS_COUNT {
                pooled.counts[pred][truth] += rec.confusion.counts[pred][truth];
            }
        }
    }
    pooled.normalize_columns()
}

/// Pooled counts across records (exposed for trace/total cross-checks).
pub fn pooled_counts(records: &[IterationRecord]) -> ConfusionMatrix {
    let mut pooled = ConfusionMatrix::new();
    for rec in records {
        for pred in 0..CLASS_COUNT {
            for truth in 0..CLASS_COUNT {
                pooled.counts[pred][truth] += rec.confusion.counts[pred][truth];
            }
        }
    }
    pooled
}

/// Mean and sample standard deviation (n-1) of per-iteration test accuracy.
pub fn summarize(records: &[IterationRecord]) -> (f64, f64) {
    let n = records.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = records.iter().map(|r| r.test_accuracy).sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = records
        .iter()
        .map(|r| (r.test_accuracy - mean).powi(2))
        .sum::<f64>()
        / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Full result of one training protocol run on one input channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub channel: ChannelKind,
    pub records: Vec<IterationRecord>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub aggregate_confusion_pct: [[f64; CLASS_COUNT]; CLASS_COUNT],
    pub macro_recall_pct: f64,
}

impl RunReport {
    pub fn from_records(
        channel: ChannelKind,
        records: Vec<IterationRecord>,
    ) -> Result<Self, EvalError> {
        if records.is_empty() {
            return Err(EvalError::NoRecords);
        }
        let (mean_accuracy, std_accuracy) = summarize(&records);
        let aggregate_confusion_pct = aggregate(&records)?;
        let macro_recall_pct = pooled_counts(&records).macro_recall_pct()?;
        Ok(RunReport {
            channel,
            records,
            mean_accuracy,
            std_accuracy,
            aggregate_confusion_pct,
            macro_recall_pct,
        })
    }

    /// Re-derive the summary fields and confirm internal consistency.
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.records.is_empty() {
            return Err(EvalError::NoRecords);
        }
        let (mean, std) = summarize(&self.records);
        if (mean - self.mean_accuracy).abs() > 1e-9 || (std - self.std_accuracy).abs() > 1e-9 {
            return Err(EvalError::IncompatibleReport(
                "summary fields disagree with records".into(),
            ));
        }
        for class in 0..CLASS_COUNT {
            let col: f64 = (0..CLASS_COUNT)
                .map(|pred| self.aggregate_confusion_pct[pred][class])
                .sum();
            if (col - 100.0).abs() > 1e-6 {
                return Err(EvalError::IncompatibleReport(format!(
                    "aggregate column {class} sums to {col}"
                )));
            }
        }
        Ok(())
    }

    /// Plain-text confusion table in the published layout: true classes as
    /// columns each summing to 100%, with the accuracy footer.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{}\n", channel_title(self.channel)));
        out.push_str(&render_confusion_text(&self.aggregate_confusion_pct));
        out.push_str(&format!(
            "Average accuracy: {:.2}%\nSTD: {:.2}\n",
            self.mean_accuracy * 100.0,
            self.std_accuracy * 100.0
        ));
        out
    }

    /// CSV mirror of the table plus footer rows.
    pub fn render_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("pred\\true,0,1,2,3,4,5,6,7,8,9\n");
        for (pred, row) in self.aggregate_confusion_pct.iter().enumerate() {
            out.push_str(&pred.to_string());
            for v in row {
                out.push_str(&format!(",{v:.4}"));
            }
            out.push('\n');
        }
        out.push_str("total,100,100,100,100,100,100,100,100,100,100\n");
        out.push_str(&format!("average_accuracy_pct,{:.4}\n", self.mean_accuracy * 100.0));
        out.push_str(&format!("std_accuracy_pct,{:.4}\n", self.std_accuracy * 100.0));
        out.push_str(&format!("macro_recall_pct,{:.4}\n", self.macro_recall_pct));
        out
    }
}

fn channel_title(channel: ChannelKind) -> &'static str {
    match channel {
        ChannelKind::Acceleration => "Acceleration",
        ChannelKind::Velocity => "Velocity",
        ChannelKind::Trajectory => "Trajectory",
    }
}

fn render_confusion_text(pct: &[[f64; CLASS_COUNT]; CLASS_COUNT]) -> String {
    let mut out = String::new();
    out.push_str("      ");
    for class in 0..CLASS_COUNT {
        out.push_str(&format!("{class:>8}"));
    }
    out.push('\n');
    for (pred, row) in pct.iter().enumerate() {
        out.push_str(&format!("{pred:>4}  "));
        for v in row {
            out.push_str(&format!("{:>7.1}%", v));
        }
        out.push('\n');
    }
    out.push_str("Total ");
    for _ in 0..CLASS_COUNT {
        out.push_str(&format!("{:>7.0}%", 100.0));
    }
    out.push('\n');
    out
}

/// Side-by-side comparison of several channel reports: ranking by mean
/// accuracy plus the published hardware-study numbers as reference lines.
pub fn render_comparison(reports: &[RunReport]) -> Result<String, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::NoRecords);
    }
    for r in reports {
        r.validate()?;
    }
    let mut out = String::new();
    for r in reports {
        out.push_str(&r.render_text());
        out.push('\n');
    }
    let mut ranked: Vec<&RunReport> = reports.iter().collect();
    ranked.sort_by(|a, b| b.mean_accuracy.total_cmp(&a.mean_accuracy));
    out.push_str("Channel ranking by mean test accuracy:\n");
    for (i, r) in ranked.iter().enumerate() {
        let reference = REFERENCE_RESULTS
            .iter()
            .find(|(c, _, _)| *c == r.channel)
            .map(|(_, acc, std)| format!("  [hardware study reference: {acc:.2}% ± {std:.2}]"))
            .unwrap_or_default();
        out.push_str(&format!(
            "  {}. {:<13} {:>6.2}% ± {:.2} (macro recall {:.2}%){}\n",
            i + 1,
            r.channel.to_string(),
            r.mean_accuracy * 100.0,
            r.std_accuracy * 100.0,
            r.macro_recall_pct,
            reference
        ));
    }
    Ok(out)
}

/// Per-iteration accuracy curves as CSV (plot data).
pub fn render_curves_csv(reports: &[RunReport]) -> String {
    let mut out = String::from("channel,iteration,test_accuracy,test_loss,epochs_run\n");
    for r in reports {
        for rec in &r.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.channel, rec.index, rec.test_accuracy, rec.test_loss, rec.epochs_run
            ));
        }
    }
    out
}
