//! Labeled time series: building them from tracks, splitting, augmenting
//! and normalizing, plus a synthetic source generator for desk-scale runs.
//!
//! The classifier consumes one `InteractionSeries` per person per sequence:
//! the temporal evolution of (distance, orientation). Real labeled data of
//! this kind is scarce, so the training pipeline enlarges it by resampling
//! each source series to random lengths and injecting label-consistent
//! feature frames, with a small admixture of label-inconsistent ones.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fmath;
use crate::geometry::{self, DistanceModel, PersonTrack};
use crate::rng::{derived_rng, seeded_rng};

/// Upper bound on a plausible face-derived distance; features beyond it are
/// clipped during normalization and never generated.
pub const MAX_DISTANCE_CM: f64 = 500.0;

/// The two-dimensional time series the classifier consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionSeries {
    pub series_id: String,
    /// One `(distance_cm, orientation_deg)` pair per frame, in frame order.
    pub frames: Vec<(f64, f64)>,
    pub label: Option<bool>,
}

impl InteractionSeries {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Fraction of frames satisfying the frame-level interaction predicate.
    pub fn interacting_fraction(&self) -> f64 {
        if self.frames.is_empty() {
            return 0.0;
        }
        let hits = self
            .frames
            .iter()
            .filter(|&&(d, o)| geometry::frame_interacting(d, o))
            .count();
        hits as f64 / self.frames.len() as f64
    }
}

/// How to partition labeled series into train/validation/test.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    /// When set, the train partition holds equally many positive and
    /// negative series; excess majority-class series spill into val/test.
    pub balanced: bool,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.70,
            val_fraction: 0.15,
            test_fraction: 0.15,
            balanced: true,
            seed: 0,
        }
    }
}

/// Parameters of the resample-and-inject augmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentSpec {
    pub copies_per_series: usize,
    /// Target length drawn uniformly from this inclusive range.
    pub length_range: (usize, usize),
    /// Feature bounds for an interacting frame.
    pub positive_distance_range_cm: (f64, f64),
    pub positive_orientation_range_deg: (f64, f64),
    /// Fraction of frames replaced by label-consistent features.
    pub injection_fraction: f64,
    /// Fraction of frames replaced by label-inconsistent features.
    pub bias_fraction: f64,
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        AugmentSpec {
            copies_per_series: 3,
            length_range: (10, 40),
            positive_distance_range_cm: (10.0, 150.0),
            positive_orientation_range_deg: (-30.0, 30.0),
            injection_fraction: 0.3,
            bias_fraction: 0.1,
            seed: 0,
        }
    }
}

impl AugmentSpec {
    fn validate(&self) -> Result<()> {
        if self.copies_per_series == 0 {
            return Err(Error::InvalidArgument(String::from(
                "copies_per_series must be positive",
            )));
        }
        let (lo, hi) = self.length_range;
        if lo < 10 || hi > 40 || lo > hi {
            return Err(Error::InvalidArgument(format!(
                "length_range ({lo}, {hi}) must lie within [10, 40]"
            )));
        }
        for (name, f) in [
            ("injection_fraction", self.injection_fraction),
            ("bias_fraction", self.bias_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidArgument(format!("{name} must be in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Composes the geometry pipeline over a track: one (distance, orientation)
/// pair per observation, label carried over. Poses must be imputed first;
/// every pose is snapped onto the 15-degree estimator vocabulary.
pub fn build_series(track: &PersonTrack, model: &DistanceModel) -> Result<InteractionSeries> {
    track.validate()?;
    let mut frames = Vec::with_capacity(track.observations.len());
    for obs in &track.observations {
        let pose = obs.pose_deg.ok_or_else(|| {
            Error::InvalidArgument(format!(
                "track {} frame {} has no pose; impute poses first",
                track.id(),
                obs.frame_index
            ))
        })?;
        if !(-geometry::POSE_MAX_DEG..=geometry::POSE_MAX_DEG).contains(&pose) {
            return Err(Error::InvalidArgument(format!(
                "track {} frame {} pose {pose} outside [-90, 90]",
                track.id(),
                obs.frame_index
            )));
        }
        let pose = geometry::quantize_pose(pose)?;
        let distance = geometry::estimate_distance(model, obs.face_height_px)?;
        frames.push((distance, pose));
    }
    Ok(InteractionSeries {
        series_id: track.id(),
        frames,
        label: track.label,
    })
}

/// Deterministic labeled split into (train, val, test).
///
/// With `balanced` set, the train partition takes `floor(train_fraction *
/// min_class_count)` series from each class; everything left over is pooled,
/// shuffled, and divided so that val holds `round(val_fraction * total)`
/// series and test the rest.
pub fn split_dataset(
    all: &[InteractionSeries],
    spec: &SplitSpec,
) -> Result<(
    Vec<InteractionSeries>,
    Vec<InteractionSeries>,
    Vec<InteractionSeries>,
)> {
    let sum = spec.train_fraction + spec.val_fraction + spec.test_fraction;
    if fmath::abs(sum - 1.0) > 1e-9
        || spec.train_fraction < 0.0
        || spec.val_fraction < 0.0
        || spec.test_fraction < 0.0
    {
        return Err(Error::InvalidArgument(String::from(
            "split fractions must be non-negative and sum to 1",
        )));
    }
    let mut positive: Vec<usize> = Vec::new();
    let mut negative: Vec<usize> = Vec::new();
    for (i, series) in all.iter().enumerate() {
        match series.label {
            Some(true) => positive.push(i),
            Some(false) => negative.push(i),
            None => {
                return Err(Error::InvalidArgument(format!(
                    "series {} is unlabeled",
                    series.series_id
                )))
            }
        }
    }
    if positive.is_empty() || negative.is_empty() {
        return Err(Error::InfeasibleSplit(String::from(
            "need at least one series of each class",
        )));
    }

    let mut rng = seeded_rng(spec.seed);
    shuffle(&mut positive, &mut rng);
    shuffle(&mut negative, &mut rng);

    let total = all.len();
    let mut train_idx: Vec<usize> = Vec::new();
    let mut leftover: Vec<usize> = Vec::new();
    if spec.balanced {
        let per_class =
            fmath::floor(spec.train_fraction * positive.len().min(negative.len()) as f64) as usize;
        if per_class == 0 {
            return Err(Error::InfeasibleSplit(String::from(
                "balanced train partition would be empty",
            )));
        }
        train_idx.extend_from_slice(&positive[..per_class]);
        train_idx.extend_from_slice(&negative[..per_class]);
        leftover.extend_from_slice(&positive[per_class..]);
        leftover.extend_from_slice(&negative[per_class..]);
    } else {
        let mut everything = positive;
        everything.extend_from_slice(&negative);
        shuffle(&mut everything, &mut rng);
        let train_count = (fmath::round(spec.train_fraction * total as f64) as usize).min(total);
        train_idx.extend_from_slice(&everything[..train_count]);
        leftover.extend_from_slice(&everything[train_count..]);
    }
    shuffle(&mut leftover, &mut rng);
    let val_count = (fmath::round(spec.val_fraction * total as f64) as usize).min(leftover.len());
    let (val_idx, test_idx) = leftover.split_at(val_count);

    let pick = |idx: &[usize]| idx.iter().map(|&i| all[i].clone()).collect::<Vec<_>>();
    Ok((pick(&train_idx), pick(val_idx), pick(test_idx)))
}

fn shuffle(indices: &mut [usize], rng: &mut ChaCha8Rng) {
    use rand::seq::SliceRandom;
    indices.shuffle(rng);
}

/// Ceiling of `fraction * len` with a guard against float dust
/// (0.3 * 10 must count as 3 frames, not 4).
fn frac_count(fraction: f64, len: usize) -> usize {
    fmath::ceil(fraction * len as f64 - 1e-9).max(0.0) as usize
}

/// Builds `copies_per_series` augmented variants of one labeled series.
///
/// Each copy resamples the source to a random length in `length_range`
/// (uniform with replacement, sampled positions kept in temporal order),
/// then overwrites a random `ceil(injection_fraction * len)` of its frames
/// with label-consistent features and a disjoint `ceil(bias_fraction *
/// len)` with label-inconsistent ones. Copies inherit the source label.
pub fn augment(series: &InteractionSeries, spec: &AugmentSpec) -> Result<Vec<InteractionSeries>> {
    let mut rng = seeded_rng(spec.seed);
    augment_with_rng(series, spec, &mut rng)
}

/// Augments a whole corpus, deriving an independent generator per source
/// series so the result does not depend on iteration order or threading.
pub fn augment_all(
    series: &[InteractionSeries],
    spec: &AugmentSpec,
) -> Result<Vec<InteractionSeries>> {
    let mut out = Vec::with_capacity(series.len() * spec.copies_per_series);
    for (i, s) in series.iter().enumerate() {
        let mut rng = derived_rng(spec.seed, i as u64);
        out.extend(augment_with_rng(s, spec, &mut rng)?);
    }
    Ok(out)
}

fn augment_with_rng(
    series: &InteractionSeries,
    spec: &AugmentSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<InteractionSeries>> {
    spec.validate()?;
    let label = series.label.ok_or_else(|| {
        Error::InvalidArgument(format!("series {} is unlabeled", series.series_id))
    })?;
    if series.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "series {} has no frames",
            series.series_id
        )));
    }

    let mut copies = Vec::with_capacity(spec.copies_per_series);
    for copy in 0..spec.copies_per_series {
        let len = rng.gen_range(spec.length_range.0..=spec.length_range.1);
        let mut picks: Vec<usize> = (0..len).map(|_| rng.gen_range(0..series.len())).collect();
        picks.sort_unstable();
        let mut frames: Vec<(f64, f64)> = picks.iter().map(|&i| series.frames[i]).collect();

        let n_inject = frac_count(spec.injection_fraction, len);
        let n_bias = frac_count(spec.bias_fraction, len).min(len - n_inject);
        let chosen = sample_indices(rng, len, n_inject + n_bias);
        for (slot, pos) in chosen.iter().enumerate() {
            let consistent = slot < n_inject;
            frames[pos] = if label == consistent {
                draw_interacting(spec, rng)
            } else {
                draw_non_interacting(spec, rng)
            };
        }

        copies.push(InteractionSeries {
            series_id: format!("{}#aug{}", series.series_id, copy),
            frames,
            label: Some(label),
        });
    }
    Ok(copies)
}

fn draw_interacting(spec: &AugmentSpec, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let (d_lo, d_hi) = spec.positive_distance_range_cm;
    let (o_lo, o_hi) = spec.positive_orientation_range_deg;
    (rng.gen_range(d_lo..=d_hi), rng.gen_range(o_lo..=o_hi))
}

/// A non-interacting feature violates exactly one bound, chosen with equal
/// probability: distance beyond the o-space (up to `MAX_DISTANCE_CM`) or
/// orientation outside the cone; the other coordinate spans its full
/// valid range.
fn draw_non_interacting(spec: &AugmentSpec, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let d_max = spec.positive_distance_range_cm.1;
    let o_max = spec.positive_orientation_range_deg.1;
    if rng.gen_bool(0.5) {
        let d = loop {
            let d = rng.gen_range(d_max..=MAX_DISTANCE_CM);
            if d > d_max {
                break d;
            }
        };
        (
            d,
            rng.gen_range(-geometry::POSE_MAX_DEG..=geometry::POSE_MAX_DEG),
        )
    } else {
        let magnitude = loop {
            let m = rng.gen_range(o_max..=geometry::POSE_MAX_DEG);
            if m > o_max {
                break m;
            }
        };
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        (
            rng.gen_range(spec.positive_distance_range_cm.0..=MAX_DISTANCE_CM),
            sign * magnitude,
        )
    }
}

/// Maps a frame into [-1, 1] x [-1, 1]: distance is clipped at
/// `MAX_DISTANCE_CM` and scaled affinely, orientation divided by 90.
pub fn normalize_frame(distance_cm: f64, orientation_deg: f64) -> [f64; 2] {
    [
        2.0 * distance_cm.min(MAX_DISTANCE_CM) / MAX_DISTANCE_CM - 1.0,
        orientation_deg / geometry::POSE_MAX_DEG,
    ]
}

/// Inverse of [`normalize_frame`] on the clipped domain.
pub fn denormalize_frame(pair: [f64; 2]) -> (f64, f64) {
    (
        (pair[0] + 1.0) * MAX_DISTANCE_CM / 2.0,
        pair[1] * geometry::POSE_MAX_DEG,
    )
}

/// Normalizes every frame of a series for the classifier.
pub fn normalize(series: &InteractionSeries) -> Vec<[f64; 2]> {
    series
        .frames
        .iter()
        .map(|&(d, o)| normalize_frame(d, o))
        .collect()
}

/// Parameters of the synthetic source generator.
///
/// Generated series mimic what the geometry pipeline produces for real
/// photo-streams: a person either holds a conversation-range position with
/// a camera-facing pose (positive) or stays far away / averted (negative),
/// with short off-label bursts ("glances") sprinkled in, and with the
/// features drifting smoothly between consecutive frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_positive: usize,
    pub num_negative: usize,
    pub length_range: (usize, usize),
    /// Per-frame probability of starting a 1-3 frame off-label burst.
    pub glance_probability: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_positive: 150,
            num_negative: 150,
            length_range: (10, 40),
            glance_probability: 0.08,
            seed: 0,
        }
    }
}

/// Generates a labeled synthetic corpus. Deterministic per spec; each
/// series draws from its own generator stream.
pub fn generate_series(spec: &SyntheticSpec) -> Vec<InteractionSeries> {
    let total = spec.num_positive + spec.num_negative;
    let mut out = Vec::with_capacity(total);
    for i in 0..total {
        let positive = i < spec.num_positive;
        let mut rng = derived_rng(spec.seed, i as u64);
        let id = if positive {
            format!("syn-pos-{i}")
        } else {
            format!("syn-neg-{}", i - spec.num_positive)
        };
        out.push(synthesize_one(spec, positive, id, &mut rng));
    }
    out
}

fn synthesize_one(
    spec: &SyntheticSpec,
    positive: bool,
    series_id: String,
    rng: &mut ChaCha8Rng,
) -> InteractionSeries {
    let len = rng.gen_range(spec.length_range.0..=spec.length_range.1);
    // Negative people are either out of range or close but averted.
    let negative_far = rng.gen_bool(0.5);
    let (mut d, mut o) = if positive {
        (rng.gen_range(40.0..=130.0), rng.gen_range(-20.0..=20.0))
    } else if negative_far {
        (rng.gen_range(200.0..=450.0), rng.gen_range(-90.0..=90.0))
    } else {
        let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        (
            rng.gen_range(60.0..=140.0),
            side * rng.gen_range(45.0..=90.0),
        )
    };

    let mut frames = Vec::with_capacity(len);
    let mut glance_left = 0usize;
    for _ in 0..len {
        if glance_left == 0 && rng.gen_bool(spec.glance_probability) {
            glance_left = rng.gen_range(1..=3);
        }
        let on_label = glance_left == 0;
        glance_left = glance_left.saturating_sub(1);

        let frame = if positive == on_label {
            // Interacting-looking frame near the current position.
            (
                (d + rng.gen_range(-12.0f64..=12.0)).clamp(15.0, 148.0),
                (o + rng.gen_range(-10.0f64..=10.0)).clamp(-28.0, 28.0),
            )
        } else if negative_far || positive {
            // Out-of-range frame; orientation unconstrained.
            (rng.gen_range(180.0..=440.0), rng.gen_range(-90.0..=90.0))
        } else {
            // Close but averted.
            let side = if o >= 0.0 { 1.0 } else { -1.0 };
            (
                (d + rng.gen_range(-12.0f64..=12.0)).clamp(40.0, 148.0),
                side * rng.gen_range(40.0..=90.0),
            )
        };
        frames.push(frame);

        d = (d + rng.gen_range(-8.0f64..=8.0)).clamp(15.0, 460.0);
        o = (o + rng.gen_range(-6.0f64..=6.0)).clamp(-90.0, 90.0);
    }

    InteractionSeries {
        series_id,
        frames,
        label: Some(positive),
    }
}
