//! Confusion-count metrics, a comparative percentage table, and the
//! epochs-to-target comparison between the two optimizers.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;
use crate::training::TrainRun;

/// Confusion counts and the ratios derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
    /// tp / (tp + fp); 0 when nothing was predicted positive (flagged).
    pub precision: f64,
    /// tp / (tp + fn); 0 when there are no positive labels.
    pub recall: f64,
    /// Harmonic mean 2PR / (P + R); 0 when P + R = 0.
    pub f_measure: f64,
    /// Set when precision's denominator was zero and the 0 is by
    /// convention, not measurement.
    pub precision_undefined: bool,
}

/// Confusion metrics over parallel prediction/label vectors.
pub fn compute_metrics(predictions: &[bool], labels: &[bool]) -> Result<Metrics> {
    if predictions.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::InvalidArgument(String::from(
            "cannot compute metrics over an empty set",
        )));
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    let mut tn = 0usize;
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let precision_undefined = tp + fp == 0;
    let precision = if precision_undefined {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f_measure = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Metrics {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        true_negatives: tn,
        precision,
        recall,
        f_measure,
        precision_undefined,
    })
}

/// One method's column in the comparative table. Values are raw ratios in
/// [0, 1]; rendering turns them into percentages.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

impl ReportRow {
    pub fn from_metrics(method: &str, metrics: &Metrics) -> ReportRow {
        ReportRow {
            method: String::from(method),
            precision: metrics.precision,
            recall: metrics.recall,
            f_measure: metrics.f_measure,
        }
    }
}

/// Published reference results for the original (non-public) evaluation
/// dataset. The ratios are carried verbatim — including their original
/// rounding, which is why the F column is not exactly the harmonic mean of
/// the P and R columns. Used to verify table formatting only; never a
/// numeric target for this implementation.
pub fn reference_report_rows() -> Vec<ReportRow> {
    [
        ("LBFGS", 0.82, 0.74, 0.77),
        ("SGD", 0.73, 0.85, 0.78),
        ("HVFF", 0.80, 0.72, 0.75),
    ]
    .iter()
    .map(|&(method, precision, recall, f_measure)| ReportRow {
        method: String::from(method),
        precision,
        recall,
        f_measure,
    })
    .collect()
}

/// Rounds a ratio to a whole percentage, halves away from zero.
pub fn percent(ratio: f64) -> i64 {
    fmath::round(ratio * 100.0) as i64
}

/// Renders the comparative table: one column per method, one row per
/// metric, percentages rounded half-away-from-zero.
pub fn compare_report(rows: &[ReportRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument(String::from(
            "report needs at least one method",
        )));
    }
    let mut width = "Metric".len();
    for row in rows {
        width = width.max(row.method.len()).max(4);
    }
    let mut out = String::new();
    out.push_str(&format!("{:<12}", "Metric"));
    for row in rows {
        out.push_str(&format!(" {:>width$}", row.method, width = width));
    }
    out.push('\n');
    for (name, pick) in [
        (
            "Precision",
            (|r: &ReportRow| r.precision) as fn(&ReportRow) -> f64,
        ),
        ("Recall", |r: &ReportRow| r.recall),
        ("F-measure", |r: &ReportRow| r.f_measure),
    ] {
        out.push_str(&format!("{name:<12}"));
        for row in rows {
            out.push_str(&format!(
                " {:>width$}",
                format!("{}%", percent(pick(row))),
                width = width
            ));
        }
        out.push('\n');
    }
    Ok(out)
}

/// First epochs at which each optimizer's validation loss dropped below a
/// shared target. `None` means the run never reached it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceSummary {
    pub target: f64,
    pub sgd_epochs: Option<usize>,
    pub lbfgs_epochs: Option<usize>,
}

fn epochs_to(run: &TrainRun, target: f64) -> Option<usize> {
    run.val_loss.iter().position(|&v| v < target).map(|i| i + 1)
}

/// Compares convergence speed of two runs started from identical weights
/// on identical data: the target is 110% of the better run's best
/// validation loss, and each side reports the first epoch strictly below
/// it (1-based).
pub fn convergence_compare(run_sgd: &TrainRun, run_lbfgs: &TrainRun) -> ConvergenceSummary {
    let best = |run: &TrainRun| run.val_loss.iter().copied().fold(f64::INFINITY, f64::min);
    let target = 1.1 * best(run_sgd).min(best(run_lbfgs));
    ConvergenceSummary {
        target,
        sgd_epochs: epochs_to(run_sgd, target),
        lbfgs_epochs: epochs_to(run_lbfgs, target),
    }
}
