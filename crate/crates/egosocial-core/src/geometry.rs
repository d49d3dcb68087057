//! F-formation geometry: turning raw face evidence into distance and
//! orientation features, and the per-frame interaction predicate.
//!
//! People engaged in a conversation keep a characteristic spatial pattern:
//! they stand around a shared empty center (the o-space) and orient toward
//! it. Relative to a chest-worn camera this reduces to two quantities per
//! person per frame: distance from the wearer and head yaw relative to the
//! wearer's line of sight. This module extracts both from face boxes.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;

/// Assumed o-space diameter: a person further away than this is outside a
/// natural conversation distance.
pub const O_SPACE_DIAMETER_CM: f64 = 150.0;

/// Maximum |yaw| for a person to count as looking at the camera wearer.
pub const INTERACTION_CONE_DEG: f64 = 30.0;

/// The wearer's own field of attention; the camera sits on the chest, so
/// the wearer may look anywhere in front of them.
pub const WEARER_FOV_DEG: f64 = 180.0;

/// Head pose estimators report yaw in discrete steps of this size.
pub const POSE_STEP_DEG: f64 = 15.0;

/// Yaw magnitude limit of the pose vocabulary.
pub const POSE_MAX_DEG: f64 = 90.0;

/// Default effective focal length (pixels) used to convert lateral pixel
/// offsets into centimeters for the bird-view model.
pub const DEFAULT_FOCAL_PX: f64 = 600.0;

/// One frame of face evidence for one person.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceObservation {
    pub frame_index: u64,
    /// Horizontal center of the face bounding box, pixels.
    pub x_center_px: f64,
    /// Height of the face bounding box, pixels. Always positive.
    pub face_height_px: f64,
    /// Estimated head yaw in degrees, `None` where the estimator failed.
    pub pose_deg: Option<f64>,
}

/// All observations of one person within one temporally segmented sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonTrack {
    pub sequence_id: String,
    pub person_id: String,
    /// Ordered by strictly increasing `frame_index`.
    pub observations: Vec<FaceObservation>,
    /// Ground truth: is this person interacting with the camera wearer?
    pub label: Option<bool>,
}

impl PersonTrack {
    /// Checks the track invariants: at least one observation, strictly
    /// increasing frame indices, positive face heights.
    pub fn validate(&self) -> Result<()> {
        if self.observations.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "track {}:{} has no observations",
                self.sequence_id, self.person_id
            )));
        }
        for pair in self.observations.windows(2) {
            if pair[1].frame_index <= pair[0].frame_index {
                return Err(Error::InvalidArgument(format!(
                    "track {}:{} frame indices not strictly increasing",
                    self.sequence_id, self.person_id
                )));
            }
        }
        for obs in &self.observations {
            if !(obs.face_height_px > 0.0) || !obs.face_height_px.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "track {}:{} has non-positive face height at frame {}",
                    self.sequence_id, self.person_id, obs.frame_index
                )));
            }
        }
        Ok(())
    }

    pub fn id(&self) -> String {
        format!("{}:{}", self.sequence_id, self.person_id)
    }
}

/// Degree-2 polynomial mapping face pixel height to distance in cm:
/// `distance = c0 + c1*h + c2*h^2`.
///
/// The polynomial is only trusted inside the height span it was fitted on;
/// heights outside `valid_range` are clamped to the nearest endpoint before
/// evaluation (quadratic extrapolation diverges quickly).
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceModel {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    /// Observed height span `(h_min, h_max)` of the calibration samples.
    pub valid_range: (f64, f64),
}

/// Top-down position of a person relative to the camera wearer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirdViewPoint {
    /// Lateral offset, cm; negative is to the wearer's left.
    pub x_cm: f64,
    /// Distance from the camera, cm. Always positive.
    pub z_cm: f64,
}

/// Snaps a yaw angle onto the estimator vocabulary: the nearest multiple of
/// 15 degrees, clamped to [-90, 90]. Exact ties round toward zero.
pub fn quantize_pose(angle_deg: f64) -> Result<f64> {
    if !angle_deg.is_finite() {
        return Err(Error::InvalidArgument(String::from(
            "pose angle must be finite",
        )));
    }
    let steps = angle_deg / POSE_STEP_DEG;
    let frac = steps - fmath::trunc(steps);
    let snapped = if fmath::abs(frac) == 0.5 {
        fmath::trunc(steps)
    } else {
        fmath::round(steps)
    };
    let max_steps = POSE_MAX_DEG / POSE_STEP_DEG;
    Ok(snapped.clamp(-max_steps, max_steps) * POSE_STEP_DEG)
}

/// Fills every missing pose in a track.
///
/// A missing pose becomes the median of the known poses within two
/// observations on each side (quantized before taking the median; the
/// even-count median averages the middle pair). If that window holds no
/// known pose, the nearest known pose along the track is used, preferring
/// the earlier one on ties. The result is re-quantized. Observations that
/// already carry a pose are returned untouched.
pub fn impute_poses(track: &PersonTrack) -> Result<PersonTrack> {
    track.validate()?;
    let known: Vec<(usize, f64)> = track
        .observations
        .iter()
        .enumerate()
        .filter_map(|(i, o)| o.pose_deg.map(|p| quantize_pose(p).map(|q| (i, q))))
        .collect::<Result<_>>()?;
    if known.is_empty() {
        return Err(Error::UnusableTrack(track.id()));
    }

    let mut out = track.clone();
    for (i, obs) in out.observations.iter_mut().enumerate() {
        if obs.pose_deg.is_some() {
            continue;
        }
        let window: Vec<f64> = known
            .iter()
            .filter(|(j, _)| i.abs_diff(*j) <= 2)
            .map(|&(_, p)| p)
            .collect();
        let pose = if window.is_empty() {
            // Nearest known pose anywhere in the track; earlier wins ties.
            known
                .iter()
                .min_by_key(|(j, _)| (i.abs_diff(*j), *j))
                .map(|&(_, p)| p)
                .expect("known is non-empty")
        } else {
            median(&window)
        };
        obs.pose_deg = Some(quantize_pose(pose)?);
    }
    Ok(out)
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Least-squares fit of the degree-2 height-to-distance polynomial.
///
/// Needs at least three samples with distinct heights. `valid_range` is set
/// to the observed height span.
pub fn fit_distance_model(samples: &[(f64, f64)]) -> Result<DistanceModel> {
    let mut distinct: Vec<f64> = Vec::new();
    for &(h, d) in samples {
        if !h.is_finite() || !d.is_finite() || h <= 0.0 {
            return Err(Error::InvalidArgument(String::from(
                "calibration samples need positive finite heights and finite distances",
            )));
        }
        if !distinct.contains(&h) {
            distinct.push(h);
        }
    }
    if distinct.len() < 3 {
        return Err(Error::UnderdeterminedFit {
            distinct_heights: distinct.len(),
        });
    }

    // Normal equations for the Vandermonde system [1 h h^2].
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for &(h, d) in samples {
        let row = [1.0, h, h * h];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * d;
        }
    }
    let coeffs = solve3(ata, atb).ok_or_else(|| {
        Error::InvalidArgument(String::from("singular normal equations in distance fit"))
    })?;

    let h_min = distinct.iter().copied().fold(f64::INFINITY, f64::min);
    let h_max = distinct.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DistanceModel {
        c0: coeffs[0],
        c1: coeffs[1],
        c2: coeffs[2],
        valid_range: (h_min, h_max),
    })
}

/// 3x3 linear solve with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot =
            (col..3).max_by(|&i, &j| fmath::abs(a[i][col]).total_cmp(&fmath::abs(a[j][col])))?;
        if fmath::abs(a[pivot][col]) < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let factor = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0f64; 3];
    for row in (0..3).rev() {
        let mut sum = b[row];
        for k in row + 1..3 {
            sum -= a[row][k] * x[k];
        }
        x[row] = sum / a[row][row];
    }
    Some(x)
}

/// Evaluates the fitted polynomial at a face height.
///
/// Heights outside the model's valid range are clamped to the nearest
/// endpoint first; the result is floored at 1 cm.
pub fn estimate_distance(model: &DistanceModel, face_height_px: f64) -> Result<f64> {
    if !(face_height_px > 0.0) || !face_height_px.is_finite() {
        return Err(Error::InvalidArgument(String::from(
            "face height must be positive and finite",
        )));
    }
    let h = face_height_px.clamp(model.valid_range.0, model.valid_range.1);
    let d = model.c0 + model.c1 * h + model.c2 * h * h;
    Ok(d.max(1.0))
}

/// Places an observation in the bird-view plane.
///
/// `z` comes from the distance model; the lateral offset follows the
/// pinhole relation `x_cm = (x_center - width/2) * z / focal_px`.
pub fn to_bird_view(
    obs: &FaceObservation,
    model: &DistanceModel,
    image_width_px: u32,
    focal_px: f64,
) -> Result<BirdViewPoint> {
    if obs.pose_deg.is_none() {
        return Err(Error::InvalidArgument(format!(
            "observation at frame {} has no pose; impute poses first",
            obs.frame_index
        )));
    }
    if !(focal_px > 0.0) {
        return Err(Error::InvalidArgument(String::from(
            "focal length must be positive",
        )));
    }
    let width = image_width_px as f64;
    if !(0.0..=width).contains(&obs.x_center_px) {
        return Err(Error::InvalidArgument(format!(
            "x_center {} outside image of width {}",
            obs.x_center_px, width
        )));
    }
    let z_cm = estimate_distance(model, obs.face_height_px)?;
    let x_cm = (obs.x_center_px - width / 2.0) * z_cm / focal_px;
    Ok(BirdViewPoint { x_cm, z_cm })
}

/// The frame-level interaction predicate: within conversation distance and
/// looking at the wearer. Both thresholds are inclusive.
pub fn frame_interacting(distance_cm: f64, orientation_deg: f64) -> bool {
    distance_cm <= O_SPACE_DIAMETER_CM && fmath::abs(orientation_deg) <= INTERACTION_CONE_DEG
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn track(poses: &[Option<f64>]) -> PersonTrack {
        PersonTrack {
            sequence_id: String::from("seq"),
            person_id: String::from("p"),
            observations: poses
                .iter()
                .enumerate()
                .map(|(i, &p)| FaceObservation {
                    frame_index: i as u64,
                    x_center_px: 100.0,
                    face_height_px: 50.0,
                    pose_deg: p,
                })
                .collect(),
            label: None,
        }
    }

    fn poses(track: &PersonTrack) -> Vec<f64> {
        track
            .observations
            .iter()
            .map(|o| o.pose_deg.unwrap())
            .collect()
    }

    #[test]
    fn quantize_identity_and_nearest() {
        assert_eq!(quantize_pose(0.0).unwrap(), 0.0);
        assert_eq!(quantize_pose(37.0).unwrap(), 30.0);
        assert_eq!(quantize_pose(-95.0).unwrap(), -90.0);
    }

    #[test]
    fn quantize_ties_round_toward_zero() {
        assert_eq!(quantize_pose(22.5).unwrap(), 15.0);
        assert_eq!(quantize_pose(-22.5).unwrap(), -15.0);
        assert_eq!(quantize_pose(7.5).unwrap(), 0.0);
        assert_eq!(quantize_pose(-7.5).unwrap(), 0.0);
    }

    #[test]
    fn quantize_rejects_non_finite() {
        assert!(quantize_pose(f64::NAN).is_err());
        assert!(quantize_pose(f64::INFINITY).is_err());
    }

    #[test]
    fn quantize_exhaustive_integer_degrees() {
        for deg in -120..=120 {
            let q = quantize_pose(deg as f64).unwrap();
            assert!((-90.0..=90.0).contains(&q), "{deg} -> {q}");
            assert_eq!(q % 15.0, 0.0, "{deg} -> {q}");
            assert_eq!(quantize_pose(q).unwrap(), q, "not idempotent at {deg}");
        }
    }

    #[test]
    fn impute_even_window_median() {
        let imputed = impute_poses(&track(&[Some(15.0), None, Some(30.0)])).unwrap();
        assert_eq!(poses(&imputed), vec![15.0, 15.0, 30.0]);
    }

    #[test]
    fn impute_leaves_complete_tracks_alone() {
        let t = track(&[Some(0.0), Some(0.0), Some(0.0)]);
        assert_eq!(impute_poses(&t).unwrap(), t);
    }

    #[test]
    fn impute_window_and_fallback() {
        let imputed = impute_poses(&track(&[None, Some(45.0), None, Some(45.0)])).unwrap();
        assert_eq!(poses(&imputed), vec![45.0, 45.0, 45.0, 45.0]);
    }

    #[test]
    fn impute_far_gap_uses_nearest_pose() {
        // Index 4 is more than two steps from the only known pose.
        let imputed = impute_poses(&track(&[Some(60.0), None, None, None, None, None])).unwrap();
        assert_eq!(poses(&imputed), vec![60.0; 6]);
    }

    #[test]
    fn impute_needs_at_least_one_pose() {
        assert_eq!(
            impute_poses(&track(&[None, None])),
            Err(Error::UnusableTrack(String::from("seq:p")))
        );
    }

    #[test]
    fn impute_never_touches_known_poses() {
        let t = track(&[Some(37.0), None, Some(-15.0)]);
        let imputed = impute_poses(&t).unwrap();
        assert_eq!(imputed.observations[0].pose_deg, Some(37.0));
        assert_eq!(imputed.observations[2].pose_deg, Some(-15.0));
    }

    #[test]
    fn fit_recovers_exact_polynomial() {
        let samples: Vec<(f64, f64)> = (1..=8)
            .map(|i| {
                let h = 30.0 * i as f64;
                (h, 300.0 - 2.0 * h + 0.01 * h * h)
            })
            .collect();
        let model = fit_distance_model(&samples).unwrap();
        assert!((model.c0 - 300.0).abs() < 1e-9, "c0 = {}", model.c0);
        assert!((model.c1 + 2.0).abs() < 1e-9, "c1 = {}", model.c1);
        assert!((model.c2 - 0.01).abs() < 1e-9, "c2 = {}", model.c2);
        assert_eq!(model.valid_range, (30.0, 240.0));
    }

    /// Pinhole oracle: distance = focal * face_height_cm / face_height_px
    /// with focal 600 px and a 24 cm head.
    fn pinhole_cm(h_px: f64) -> f64 {
        600.0 * 24.0 / h_px
    }

    #[test]
    fn fit_pinhole_rmse_under_5cm() {
        // A quadratic cannot follow the 1/h curvature below ~80 px tightly
        // enough for a 5 cm bound, so calibration starts at 80 px (180 cm,
        // comfortably past the o-space boundary).
        let samples: Vec<(f64, f64)> = (80..=240)
            .step_by(10)
            .map(|h| (h as f64, pinhole_cm(h as f64)))
            .collect();
        let model = fit_distance_model(&samples).unwrap();
        let mut sq = 0.0;
        let mut n = 0.0;
        for h in 80..=240 {
            let err = estimate_distance(&model, h as f64).unwrap() - pinhole_cm(h as f64);
            sq += err * err;
            n += 1.0;
        }
        let rmse = fmath::sqrt(sq / n);
        assert!(rmse < 5.0, "rmse = {rmse}");
    }

    #[test]
    fn fit_rejects_two_distinct_heights() {
        let samples = [(50.0, 100.0), (50.0, 102.0), (80.0, 60.0)];
        assert_eq!(
            fit_distance_model(&samples),
            Err(Error::UnderdeterminedFit {
                distinct_heights: 2
            })
        );
    }

    fn fixed_model() -> DistanceModel {
        DistanceModel {
            c0: 300.0,
            c1: -2.0,
            c2: 0.01,
            valid_range: (30.0, 240.0),
        }
    }

    #[test]
    fn estimate_evaluates_polynomial() {
        let d = estimate_distance(&fixed_model(), 100.0).unwrap();
        assert!((d - 200.0).abs() < 1e-12, "d = {d}");
    }

    #[test]
    fn estimate_pinhole_checkpoint() {
        let samples: Vec<(f64, f64)> = (80..=240)
            .step_by(10)
            .map(|h| (h as f64, pinhole_cm(h as f64)))
            .collect();
        let model = fit_distance_model(&samples).unwrap();
        let d = estimate_distance(&model, 96.0).unwrap();
        assert!((d - 150.0).abs() < 5.0, "d = {d}");
    }

    #[test]
    fn estimate_rejects_bad_heights() {
        assert!(estimate_distance(&fixed_model(), 0.0).is_err());
        assert!(estimate_distance(&fixed_model(), -3.0).is_err());
        assert!(estimate_distance(&fixed_model(), f64::NAN).is_err());
    }

    #[test]
    fn estimate_clamps_outside_valid_range() {
        let m = fixed_model();
        let at_min = estimate_distance(&m, 30.0).unwrap();
        let below = estimate_distance(&m, 5.0).unwrap();
        assert_eq!(at_min, below);
        let at_max = estimate_distance(&m, 240.0).unwrap();
        let above = estimate_distance(&m, 400.0).unwrap();
        assert_eq!(at_max, above);
    }

    fn obs(x_center: f64, h: f64) -> FaceObservation {
        FaceObservation {
            frame_index: 0,
            x_center_px: x_center,
            face_height_px: h,
            pose_deg: Some(0.0),
        }
    }

    #[test]
    fn bird_view_center_is_zero() {
        let p = to_bird_view(&obs(500.0, 100.0), &fixed_model(), 1000, 600.0).unwrap();
        assert_eq!(p.x_cm, 0.0);
    }

    #[test]
    fn bird_view_similar_triangles() {
        // h = 100 gives z = 200 under the fixed model.
        let p = to_bird_view(&obs(800.0, 100.0), &fixed_model(), 1000, 600.0).unwrap();
        assert!((p.x_cm - 100.0).abs() < 1e-12, "x = {}", p.x_cm);
        assert!((p.z_cm - 200.0).abs() < 1e-12, "z = {}", p.z_cm);
    }

    #[test]
    fn bird_view_rejects_out_of_image() {
        assert!(to_bird_view(&obs(-5.0, 100.0), &fixed_model(), 1000, 600.0).is_err());
        assert!(to_bird_view(&obs(1000.5, 100.0), &fixed_model(), 1000, 600.0).is_err());
    }

    #[test]
    fn bird_view_requires_pose() {
        let mut o = obs(500.0, 100.0);
        o.pose_deg = None;
        assert!(to_bird_view(&o, &fixed_model(), 1000, 600.0).is_err());
    }

    #[test]
    fn frame_predicate_examples() {
        assert!(frame_interacting(100.0, 0.0));
        assert!(!frame_interacting(200.0, 0.0));
        assert!(!frame_interacting(100.0, 45.0));
    }

    #[test]
    fn frame_predicate_boundaries_inclusive() {
        assert!(frame_interacting(150.0, 30.0));
        assert!(frame_interacting(150.0, -30.0));
        assert!(!frame_interacting(150.0 + 1e-9, 0.0));
        assert!(!frame_interacting(0.0, 30.0 + 1e-9));
    }

    #[test]
    fn frame_predicate_matches_brute_force_grid() {
        for d in 0..=300 {
            for o in -90..=90 {
                let dist = d as f64;
                let orient = o as f64;
                let direct = dist <= 150.0 && (-30.0..=30.0).contains(&orient);
                assert_eq!(frame_interacting(dist, orient), direct, "d={d} o={o}");
            }
        }
    }

    proptest! {
        #[test]
        fn quantize_always_lands_on_grid(angle in -1000.0f64..1000.0) {
            let q = quantize_pose(angle).unwrap();
            prop_assert!((-90.0..=90.0).contains(&q));
            prop_assert_eq!(q % 15.0, 0.0);
            prop_assert_eq!(quantize_pose(q).unwrap(), q);
        }

        #[test]
        fn estimate_is_monotone_under_clamp(h in 1.0f64..500.0) {
            // Inside the range the polynomial is whatever it is, but the
            // clamp must make values outside the span equal the endpoint.
            let m = fixed_model();
            let d = estimate_distance(&m, h).unwrap();
            let clamped = h.clamp(30.0, 240.0);
            let expected = (300.0 - 2.0 * clamped + 0.01 * clamped * clamped).max(1.0);
            prop_assert!((d - expected).abs() < 1e-12);
        }

        #[test]
        fn bird_view_mirrors_about_midline(offset in 0.0f64..500.0, h in 40.0f64..200.0) {
            let m = fixed_model();
            let left = to_bird_view(&obs(500.0 - offset, h), &m, 1000, 600.0).unwrap();
            let right = to_bird_view(&obs(500.0 + offset, h), &m, 1000, 600.0).unwrap();
            prop_assert!((left.x_cm + right.x_cm).abs() < 1e-9);
            prop_assert_eq!(left.z_cm, right.z_cm);
        }
    }
}
