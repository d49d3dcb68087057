//! Text formats for every artifact the pipeline reads or writes.
//!
//! All formats are line-oriented UTF-8. Floating-point values are written
//! with Rust's shortest round-trip formatting and parsed with the standard
//! float parser, so a write → read cycle reproduces every value bit for
//! bit. Writers are the only producers of these files in the pipeline, so
//! identical inputs yield byte-identical artifacts.
//!
//! | artifact            | shape                                          |
//! |---------------------|------------------------------------------------|
//! | calibration samples | CSV `face_height_px,distance_cm`               |
//! | distance model      | `key value` lines: c0 c1 c2 h_min h_max        |
//! | detection tracks    | JSON lines, one track per line                 |
//! | feature series      | CSV `series_id,frame,distance_cm,orientation_deg,label` |
//! | model checkpoint    | header + named weight arrays with shapes       |
//! | training metrics    | CSV `epoch,train_loss,val_loss,val_acc`        |
//! | search trials       | JSON lines, one trial per line                 |
//! | search summary      | CSV `rank,trial,num_blocks,lr,momentum,batch,val_loss,val_acc` |
//! | threshold sweep     | CSV `threshold,precision,recall,f_measure`     |
//! | evaluation report   | `key value` lines (counts and rates)           |

use std::collections::HashSet;
use std::fmt::Write as _;

use egosocial_core::dataset::InteractionSeries;
use egosocial_core::evaluation::Metrics;
use egosocial_core::geometry::{DistanceModel, FaceObservation, PersonTrack};
use egosocial_core::lstm::{Layout, LstmConfig, LstmModel};
use egosocial_core::search::TrialResult;
use egosocial_core::training::{Optimizer, TrainConfig, TrainRun};
use egosocial_core::{Error, Result};
use serde::{Deserialize, Serialize};

pub const CALIBRATION_HEADER: &str = "face_height_px,distance_cm";
pub const SERIES_HEADER: &str = "series_id,frame,distance_cm,orientation_deg,label";
pub const METRICS_HEADER: &str = "epoch,train_loss,val_loss,val_acc";
pub const SUMMARY_HEADER: &str = "rank,trial,num_blocks,lr,momentum,batch,val_loss,val_acc";
pub const SWEEP_HEADER: &str = "threshold,precision,recall,f_measure";
pub const CHECKPOINT_MAGIC: &str = "egosocial-lstm-checkpoint v1";

fn bad(line: usize, what: impl AsRef<str>) -> Error {
    Error::InvalidArgument(format!("line {line}: {}", what.as_ref()))
}

fn parse_num<T: std::str::FromStr>(field: &str, what: &str, line: usize) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| bad(line, format!("cannot parse {what} from {field:?}")))
}

/// Numbered non-empty lines; a trailing newline does not count as a line.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn expect_header(text: &str, header: &str) -> Result<()> {
    match lines(text).next() {
        Some((_, first)) if first.trim() == header => Ok(()),
        Some((line, first)) => Err(bad(
            line,
            format!("expected header {header:?}, found {first:?}"),
        )),
        None => Err(Error::InvalidArgument(format!(
            "empty file; expected header {header:?}"
        ))),
    }
}

// ---------------------------------------------------------------------------
// Calibration samples
// ---------------------------------------------------------------------------

/// Renders `(face_height_px, distance_cm)` pairs as CSV.
pub fn write_calibration_csv(samples: &[(f64, f64)]) -> String {
    let mut out = String::from(CALIBRATION_HEADER);
    out.push('\n');
    for &(h, d) in samples {
        let _ = writeln!(out, "{h},{d}");
    }
    out
}

/// Parses calibration CSV into `(face_height_px, distance_cm)` pairs.
pub fn parse_calibration_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    expect_header(text, CALIBRATION_HEADER)?;
    let mut samples = Vec::new();
    for (line, row) in lines(text).skip(1) {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 2 {
            return Err(bad(
                line,
                format!("expected 2 fields, found {}", fields.len()),
            ));
        }
        samples.push((
            parse_num(fields[0], "face_height_px", line)?,
            parse_num(fields[1], "distance_cm", line)?,
        ));
    }
    Ok(samples)
}

// ---------------------------------------------------------------------------
// Distance model
// ---------------------------------------------------------------------------

/// Renders a fitted distance model as `key value` lines.
pub fn write_distance_model(model: &DistanceModel) -> String {
    format!(
        "c0 {}\nc1 {}\nc2 {}\nh_min {}\nh_max {}\n",
        model.c0, model.c1, model.c2, model.valid_range.0, model.valid_range.1
    )
}

/// Parses the `key value` distance-model file.
pub fn parse_distance_model(text: &str) -> Result<DistanceModel> {
    let mut fields = [None::<f64>; 5];
    const KEYS: [&str; 5] = ["c0", "c1", "c2", "h_min", "h_max"];
    for (line, row) in lines(text) {
        let (key, value) = row
            .trim()
            .split_once(char::is_whitespace)
            .ok_or_else(|| bad(line, format!("expected 'key value', found {row:?}")))?;
        let slot = KEYS
            .iter()
            .position(|&k| k == key)
            .ok_or_else(|| bad(line, format!("unknown key {key:?}")))?;
        if fields[slot].is_some() {
            return Err(bad(line, format!("duplicate key {key:?}")));
        }
        fields[slot] = Some(parse_num(value, key, line)?);
    }
    let take = |i: usize| {
        fields[i].ok_or_else(|| Error::InvalidArgument(format!("missing key {:?}", KEYS[i])))
    };
    Ok(DistanceModel {
        c0: take(0)?,
        c1: take(1)?,
        c2: take(2)?,
        valid_range: (take(3)?, take(4)?),
    })
}

// ---------------------------------------------------------------------------
// Detection tracks (JSON lines)
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TrackRecord {
    sequence_id: String,
    person_id: String,
    /// 1 = interacting, 0 = not; absent when unlabeled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<u8>,
    frames: Vec<FrameRecord>,
}

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    t: u64,
    x_center_px: f64,
    face_height_px: f64,
    /// Head yaw in degrees; null where the pose estimator failed.
    #[serde(default)]
    pose_deg: Option<f64>,
}

/// Renders person tracks as JSON lines, one track per line.
pub fn write_tracks_jsonl(tracks: &[PersonTrack]) -> String {
    let mut out = String::new();
    for track in tracks {
        let record = TrackRecord {
            sequence_id: track.sequence_id.clone(),
            person_id: track.person_id.clone(),
            label: track.label.map(u8::from),
            frames: track
                .observations
                .iter()
                .map(|o| FrameRecord {
                    t: o.frame_index,
                    x_center_px: o.x_center_px,
                    face_height_px: o.face_height_px,
                    pose_deg: o.pose_deg,
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&record).expect("track serialization cannot fail"));
        out.push('\n');
    }
    out
}

/// Parses JSON-lines person tracks.
pub fn parse_tracks_jsonl(text: &str) -> Result<Vec<PersonTrack>> {
    let mut tracks = Vec::new();
    for (line, row) in lines(text) {
        let record: TrackRecord = serde_json::from_str(row)
            .map_err(|e| bad(line, format!("invalid track record: {e}")))?;
        let label = match record.label {
            None => None,
            Some(0) => Some(false),
            Some(1) => Some(true),
            Some(other) => return Err(bad(line, format!("label must be 0 or 1, found {other}"))),
        };
        tracks.push(PersonTrack {
            sequence_id: record.sequence_id,
            person_id: record.person_id,
            observations: record
                .frames
                .into_iter()
                .map(|f| FaceObservation {
                    frame_index: f.t,
                    x_center_px: f.x_center_px,
                    face_height_px: f.face_height_px,
                    pose_deg: f.pose_deg,
                })
                .collect(),
            label,
        });
    }
    Ok(tracks)
}

// ---------------------------------------------------------------------------
// Feature series
// ---------------------------------------------------------------------------

/// Renders labeled feature series as CSV, one frame per row. The label
/// column repeats the series label (`1`/`0`) and is empty when unlabeled.
pub fn write_series_csv(series: &[InteractionSeries]) -> Result<String> {
    let mut out = String::from(SERIES_HEADER);
    out.push('\n');
    for s in series {
        if s.series_id.contains(',') || s.series_id.trim().is_empty() {
            return Err(Error::InvalidArgument(format!(
                "series id {:?} cannot be stored in CSV",
                s.series_id
            )));
        }
        let label = match s.label {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        for (i, &(d, o)) in s.frames.iter().enumerate() {
            let _ = writeln!(out, "{},{i},{d},{o},{label}", s.series_id);
        }
    }
    Ok(out)
}

/// Parses the feature-series CSV back into series, grouping consecutive
/// rows that share a `series_id`. Within a series, frame numbers must count
/// up from 0 and every row must carry the same label.
pub fn parse_series_csv(text: &str) -> Result<Vec<InteractionSeries>> {
    expect_header(text, SERIES_HEADER)?;
    let mut series: Vec<InteractionSeries> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (line, row) in lines(text).skip(1) {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 5 {
            return Err(bad(
                line,
                format!("expected 5 fields, found {}", fields.len()),
            ));
        }
        let id = fields[0];
        let frame: usize = parse_num(fields[1], "frame", line)?;
        let d: f64 = parse_num(fields[2], "distance_cm", line)?;
        let o: f64 = parse_num(fields[3], "orientation_deg", line)?;
        let label = match fields[4].trim() {
            "" => None,
            "1" => Some(true),
            "0" => Some(false),
            other => {
                return Err(bad(
                    line,
                    format!("label must be 0, 1, or empty, found {other:?}"),
                ))
            }
        };

        let start_new = series.last().is_none_or(|s| s.series_id != id);
        if start_new {
            if !seen.insert(id.to_string()) {
                return Err(bad(
                    line,
                    format!("series {id:?} appears in two separate blocks"),
                ));
            }
            series.push(InteractionSeries {
                series_id: id.to_string(),
                frames: Vec::new(),
                label,
            });
        }
        let current = series.last_mut().expect("just pushed");
        if label != current.label {
            return Err(bad(line, format!("series {id:?} mixes label values")));
        }
        if frame != current.frames.len() {
            return Err(bad(
                line,
                format!(
                    "series {id:?} expected frame {}, found {frame}",
                    current.frames.len()
                ),
            ));
        }
        current.frames.push((d, o));
    }
    Ok(series)
}

// ---------------------------------------------------------------------------
// Model checkpoint
// ---------------------------------------------------------------------------

/// Canonical checkpoint order: `(name, offset, len)` for every named weight
/// array in the flat parameter vector, covering it exactly once.
fn checkpoint_arrays(lay: &Layout) -> Vec<(String, usize, usize)> {
    let i = lay.input_dim;
    let n = lay.hidden();
    let c = lay.cells_per_block;
    let mut arrays = Vec::new();
    for j in 0..lay.num_blocks {
        arrays.push((format!("block{j}.in_gate.x"), lay.in_gate_x(j), i));
        arrays.push((format!("block{j}.in_gate.y"), lay.in_gate_y(j), n));
        arrays.push((
            format!("block{j}.in_gate.peephole"),
            lay.in_gate_peephole(j),
            c,
        ));
        arrays.push((format!("block{j}.in_gate.bias"), lay.in_gate_bias(j), 1));
        arrays.push((format!("block{j}.out_gate.x"), lay.out_gate_x(j), i));
        arrays.push((format!("block{j}.out_gate.y"), lay.out_gate_y(j), n));
        arrays.push((
            format!("block{j}.out_gate.peephole"),
            lay.out_gate_peephole(j),
            c,
        ));
        arrays.push((format!("block{j}.out_gate.bias"), lay.out_gate_bias(j), 1));
        for k in 0..c {
            arrays.push((format!("block{j}.cell{k}.x"), lay.cell_x(j, k), i));
            arrays.push((format!("block{j}.cell{k}.y"), lay.cell_y(j, k), n));
        }
    }
    arrays.push((String::from("readout.w"), lay.readout_w(), n));
    arrays.push((String::from("readout.bias"), lay.readout_bias(), 1));
    arrays
}

/// Renders a model as a self-describing text checkpoint: a header with the
/// architecture, then one `array <name> <len> <values...>` line per named
/// weight array.
pub fn write_checkpoint(model: &LstmModel) -> String {
    let cfg = model.config();
    let lay = model.layout();
    let params = model.params();
    let mut out = format!(
        "{CHECKPOINT_MAGIC}\n\
         num_blocks {}\ncells_per_block {}\ninput_dim {}\nalpha {}\ninit_range {}\nseed {}\n\
         total_params {}\n",
        cfg.num_blocks,
        cfg.cells_per_block,
        cfg.input_dim,
        cfg.alpha,
        cfg.init_range,
        cfg.seed,
        params.len()
    );
    for (name, offset, len) in checkpoint_arrays(&lay) {
        let _ = write!(out, "array {name} {len}");
        for &w in &params[offset..offset + len] {
            let _ = write!(out, " {w}");
        }
        out.push('\n');
    }
    out
}

/// Parses a text checkpoint back into a model; a written checkpoint loads
/// to bit-identical weights.
pub fn parse_checkpoint(text: &str) -> Result<LstmModel> {
    let mut rows = lines(text);
    match rows.next() {
        Some((_, first)) if first.trim() == CHECKPOINT_MAGIC => {}
        _ => {
            return Err(Error::InvalidArgument(format!(
                "not a checkpoint: expected first line {CHECKPOINT_MAGIC:?}"
            )))
        }
    }

    let mut header: Vec<(usize, &str, &str)> = Vec::new();
    let mut arrays: Vec<(usize, &str)> = Vec::new();
    for (line, row) in rows {
        match row.trim().strip_prefix("array ") {
            Some(rest) => arrays.push((line, rest)),
            None if arrays.is_empty() => {
                let (key, value) = row
                    .trim()
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| bad(line, format!("expected 'key value', found {row:?}")))?;
                header.push((line, key, value));
            }
            None => return Err(bad(line, "header line after the first array line")),
        }
    }

    let get = |key: &str| -> Result<(usize, &str)> {
        header
            .iter()
            .find(|&&(_, k, _)| k == key)
            .map(|&(line, _, v)| (line, v))
            .ok_or_else(|| Error::InvalidArgument(format!("checkpoint missing {key:?}")))
    };
    let num =
        |pair: (usize, &str), what: &str| -> Result<usize> { parse_num(pair.1, what, pair.0) };
    let fnum = |pair: (usize, &str), what: &str| -> Result<f64> { parse_num(pair.1, what, pair.0) };

    let config = LstmConfig {
        num_blocks: num(get("num_blocks")?, "num_blocks")?,
        cells_per_block: num(get("cells_per_block")?, "cells_per_block")?,
        input_dim: num(get("input_dim")?, "input_dim")?,
        alpha: fnum(get("alpha")?, "alpha")?,
        init_range: fnum(get("init_range")?, "init_range")?,
        seed: {
            let (line, v) = get("seed")?;
            parse_num::<u64>(v, "seed", line)?
        },
    };
    config.validate()?;
    let lay = Layout::new(&config);
    let total = num(get("total_params")?, "total_params")?;
    if total != lay.total() {
        return Err(Error::InvalidArgument(format!(
            "total_params {total} does not match the architecture ({} expected)",
            lay.total()
        )));
    }

    let expected = checkpoint_arrays(&lay);
    if arrays.len() != expected.len() {
        return Err(Error::InvalidArgument(format!(
            "expected {} weight arrays, found {}",
            expected.len(),
            arrays.len()
        )));
    }
    let mut params = vec![0.0; total];
    for ((line, row), (name, offset, len)) in arrays.into_iter().zip(expected) {
        let mut fields = row.split_whitespace();
        let found_name = fields.next().ok_or_else(|| bad(line, "empty array line"))?;
        if found_name != name {
            return Err(bad(
                line,
                format!("expected array {name:?}, found {found_name:?}"),
            ));
        }
        let found_len: usize = parse_num(
            fields
                .next()
                .ok_or_else(|| bad(line, "array line missing length"))?,
            "array length",
            line,
        )?;
        if found_len != len {
            return Err(bad(
                line,
                format!("array {name:?} expected {len} values, found {found_len}"),
            ));
        }
        for slot in 0..len {
            let field = fields
                .next()
                .ok_or_else(|| bad(line, format!("array {name:?} is short of values")))?;
            params[offset + slot] = parse_num(field, "weight", line)?;
        }
        if fields.next().is_some() {
            return Err(bad(line, format!("array {name:?} has extra values")));
        }
    }
    LstmModel::from_params(config, params)
}

// ---------------------------------------------------------------------------
// Training metrics
// ---------------------------------------------------------------------------

/// Renders per-epoch training curves as CSV (1-based epochs).
pub fn write_metrics_csv(run: &TrainRun) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for (i, ((tl, vl), va)) in run
        .train_loss
        .iter()
        .zip(&run.val_loss)
        .zip(&run.val_acc)
        .enumerate()
    {
        let _ = writeln!(out, "{},{tl},{vl},{va}", i + 1);
    }
    out
}

/// Parses the training-metrics CSV into `(epoch, train_loss, val_loss,
/// val_acc)` rows.
pub fn parse_metrics_csv(text: &str) -> Result<Vec<(usize, f64, f64, f64)>> {
    expect_header(text, METRICS_HEADER)?;
    let mut out = Vec::new();
    for (line, row) in lines(text).skip(1) {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 4 {
            return Err(bad(
                line,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        out.push((
            parse_num(fields[0], "epoch", line)?,
            parse_num(fields[1], "train_loss", line)?,
            parse_num(fields[2], "val_loss", line)?,
            parse_num(fields[3], "val_acc", line)?,
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Search trials
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TrialRecord {
    trial: u64,
    num_blocks: usize,
    cells_per_block: usize,
    input_dim: usize,
    alpha: f64,
    init_range: f64,
    lstm_seed: u64,
    optimizer: String,
    learning_rate: f64,
    momentum: f64,
    batch_size: usize,
    max_epochs: usize,
    patience: usize,
    lbfgs_memory: usize,
    train_seed: u64,
    /// Absent for diverged trials (an infinite loss has no JSON number).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    val_loss: Option<f64>,
    val_acc: f64,
    best_epoch: usize,
    diverged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    wall_seconds: Option<f64>,
}

fn optimizer_name(optimizer: Optimizer) -> &'static str {
    match optimizer {
        Optimizer::Sgd => "sgd",
        Optimizer::Lbfgs => "lbfgs",
    }
}

/// Parses the optimizer names used across config files and trial records.
pub fn parse_optimizer(name: &str) -> Result<Optimizer> {
    match name.trim().to_ascii_lowercase().as_str() {
        "sgd" => Ok(Optimizer::Sgd),
        "lbfgs" | "l-bfgs" => Ok(Optimizer::Lbfgs),
        other => Err(Error::InvalidArgument(format!(
            "unknown optimizer {other:?}; expected sgd or lbfgs"
        ))),
    }
}

/// Renders one search trial as a single self-describing JSON line.
pub fn trial_record_json(result: &TrialResult) -> String {
    let record = TrialRecord {
        trial: result.trial_index,
        num_blocks: result.lstm_config.num_blocks,
        cells_per_block: result.lstm_config.cells_per_block,
        input_dim: result.lstm_config.input_dim,
        alpha: result.lstm_config.alpha,
        init_range: result.lstm_config.init_range,
        lstm_seed: result.lstm_config.seed,
        optimizer: optimizer_name(result.train_config.optimizer).to_string(),
        learning_rate: result.train_config.learning_rate,
        momentum: result.train_config.momentum,
        batch_size: result.train_config.batch_size,
        max_epochs: result.train_config.max_epochs,
        patience: result.train_config.patience,
        lbfgs_memory: result.train_config.lbfgs_memory,
        train_seed: result.train_config.seed,
        val_loss: result.val_loss.is_finite().then_some(result.val_loss),
        val_acc: result.val_acc,
        best_epoch: result.best_epoch,
        diverged: result.diverged,
        wall_seconds: result.wall_seconds,
    };
    serde_json::to_string(&record).expect("trial serialization cannot fail")
}

/// Renders trial results as JSON lines, one trial per line.
pub fn write_trials_jsonl(results: &[TrialResult]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&trial_record_json(r));
        out.push('\n');
    }
    out
}

/// Parses JSON-lines trial records.
pub fn parse_trials_jsonl(text: &str) -> Result<Vec<TrialResult>> {
    let mut out = Vec::new();
    for (line, row) in lines(text) {
        let r: TrialRecord = serde_json::from_str(row)
            .map_err(|e| bad(line, format!("invalid trial record: {e}")))?;
        out.push(TrialResult {
            trial_index: r.trial,
            lstm_config: LstmConfig {
                num_blocks: r.num_blocks,
                cells_per_block: r.cells_per_block,
                input_dim: r.input_dim,
                alpha: r.alpha,
                init_range: r.init_range,
                seed: r.lstm_seed,
            },
            train_config: TrainConfig {
                optimizer: parse_optimizer(&r.optimizer).map_err(|e| bad(line, e.to_string()))?,
                learning_rate: r.learning_rate,
                momentum: r.momentum,
                batch_size: r.batch_size,
                max_epochs: r.max_epochs,
                patience: r.patience,
                lbfgs_memory: r.lbfgs_memory,
                seed: r.train_seed,
            },
            val_loss: r.val_loss.unwrap_or(f64::INFINITY),
            val_acc: r.val_acc,
            best_epoch: r.best_epoch,
            diverged: r.diverged,
            wall_seconds: r.wall_seconds,
        });
    }
    Ok(out)
}

/// Renders ranked trials as the summary CSV (rank 1 = best).
pub fn write_search_summary(ranked: &[TrialResult]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for (i, r) in ranked.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            i + 1,
            r.trial_index,
            r.lstm_config.num_blocks,
            r.train_config.learning_rate,
            r.train_config.momentum,
            r.train_config.batch_size,
            r.val_loss,
            r.val_acc
        );
    }
    out
}

// ---------------------------------------------------------------------------
// Threshold sweep
// ---------------------------------------------------------------------------

/// Renders the per-threshold metrics of a baseline sweep as CSV.
pub fn write_sweep_csv(rows: &[(f64, Metrics)]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for (threshold, m) in rows {
        let _ = writeln!(
            out,
            "{threshold},{},{},{}",
            m.precision, m.recall, m.f_measure
        );
    }
    out
}

/// Parses the sweep CSV into `(threshold, precision, recall, f_measure)`
/// rows.
pub fn parse_sweep_csv(text: &str) -> Result<Vec<(f64, f64, f64, f64)>> {
    expect_header(text, SWEEP_HEADER)?;
    let mut out = Vec::new();
    for (line, row) in lines(text).skip(1) {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 4 {
            return Err(bad(
                line,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        out.push((
            parse_num(fields[0], "threshold", line)?,
            parse_num(fields[1], "precision", line)?,
            parse_num(fields[2], "recall", line)?,
            parse_num(fields[3], "f_measure", line)?,
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Evaluation report
// ---------------------------------------------------------------------------

/// Renders confusion counts and rates as `key value` lines.
pub fn write_eval_report(metrics: &Metrics) -> String {
    format!(
        "true_positives {}\nfalse_positives {}\nfalse_negatives {}\ntrue_negatives {}\n\
         precision {}\nrecall {}\nf_measure {}\nprecision_undefined {}\n",
        metrics.true_positives,
        metrics.false_positives,
        metrics.false_negatives,
        metrics.true_negatives,
        metrics.precision,
        metrics.recall,
        metrics.f_measure,
        metrics.precision_undefined
    )
}

/// Pulls `(precision, recall, f_measure)` out of an evaluation report.
pub fn parse_eval_rates(text: &str) -> Result<(f64, f64, f64)> {
    let mut precision = None;
    let mut recall = None;
    let mut f_measure = None;
    for (line, row) in lines(text) {
        let Some((key, value)) = row.trim().split_once(char::is_whitespace) else {
            continue;
        };
        let slot = match key {
            "precision" => &mut precision,
            "recall" => &mut recall,
            "f_measure" => &mut f_measure,
            _ => continue,
        };
        *slot = Some(parse_num::<f64>(value, key, line)?);
    }
    match (precision, recall, f_measure) {
        (Some(p), Some(r), Some(f)) => Ok((p, r, f)),
        _ => Err(Error::InvalidArgument(String::from(
            "report needs precision, recall, and f_measure keys",
        ))),
    }
}
