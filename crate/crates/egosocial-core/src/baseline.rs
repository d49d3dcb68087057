//! Frame-threshold reference classifier: decide each frame with the
//! geometric interaction predicate, then call the series positive when the
//! interacting fraction strictly exceeds a threshold.
//!
//! This is the per-frame approach the recurrent classifier is measured
//! against. Its prediction depends only on the fraction — never on frame
//! order — which is exactly the weakness a sequence model can exploit.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dataset::InteractionSeries;
use crate::error::{Error, Result};
use crate::evaluation::{compute_metrics, Metrics};

/// Fraction of interacting frames a series must strictly exceed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub threshold: f64,
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidArgument(format!(
                "threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Positive iff interacting-frame fraction > threshold (strictly; a
/// threshold of 1 therefore never predicts positive).
pub fn classify_baseline(series: &InteractionSeries, config: &BaselineConfig) -> Result<bool> {
    config.validate()?;
    if series.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "series {} has no frames",
            series.series_id
        )));
    }
    Ok(series.interacting_fraction() > config.threshold)
}

/// Metrics at every grid threshold plus the best one by F-measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSweep {
    /// One `(threshold, metrics)` row per grid point, in grid order.
    pub rows: Vec<(f64, Metrics)>,
    /// Argmax-F threshold; ties go to the smaller threshold.
    pub best_threshold: f64,
    pub best_f_measure: f64,
}

/// Evaluates the classifier across a threshold grid on labeled series.
pub fn sweep_threshold(series: &[InteractionSeries], grid: &[f64]) -> Result<ThresholdSweep> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument(String::from(
            "threshold grid must be non-empty",
        )));
    }
    let labels: Vec<bool> = series
        .iter()
        .map(|s| {
            s.label.ok_or_else(|| {
                Error::InvalidArgument(format!("series {} is unlabeled", s.series_id))
            })
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(grid.len());
    for &threshold in grid {
        let config = BaselineConfig { threshold };
        let predictions: Vec<bool> = series
            .iter()
            .map(|s| classify_baseline(s, &config))
            .collect::<Result<_>>()?;
        rows.push((threshold, compute_metrics(&predictions, &labels)?));
    }

    let (mut best_threshold, mut best_f) = (rows[0].0, rows[0].1.f_measure);
    for &(threshold, ref metrics) in &rows[1..] {
        let better = metrics.f_measure > best_f
            || (metrics.f_measure == best_f && threshold < best_threshold);
        if better {
            best_threshold = threshold;
            best_f = metrics.f_measure;
        }
    }
    Ok(ThresholdSweep {
        rows,
        best_threshold,
        best_f_measure: best_f,
    })
}
