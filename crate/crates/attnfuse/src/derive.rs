//! Landmark-derived per-frame features: eye aspect ratio, head size,
//! nose size, and z-score normalization.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ingest::{CategoryTrack, FrameFeatureStream, LandmarkFrame};
use crate::mat::{mean, std_pop, Mat};
use crate::types::{Category, Point2};

#[derive(Debug, Error)]
pub enum DeriveError {
    #[error("degenerate eye: horizontal extent is zero")]
    DegenerateEye,
    #[error("frame is flagged invalid")]
    InvalidFrame,
    #[error("empty series")]
    EmptySeries,
}

pub type Result<T> = std::result::Result<T, DeriveError>;

/// Per-frame features derived from one landmark frame.
///
/// The landmark schema carries a single annotated eye (P0..P5), so both
/// EAR slots are filled from it; a producer with true per-eye landmarks
/// supplies both values through the frame-feature CSV instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedFrameFeatures {
    pub ear_right: f64,
    pub ear_left: f64,
    pub head_width: f64,
    pub head_height: f64,
    pub nose_width: f64,
    pub nose_height: f64,
}

/// Eye aspect ratio of six eye landmarks:
/// (‖P1−P5‖ + ‖P2−P4‖) / (2·‖P0−P3‖).
pub fn compute_ear(eye: &[Point2; 6]) -> Result<f64> {
    let horizontal = eye[0].distance(eye[3]);
    if horizontal == 0.0 {
        return Err(DeriveError::DegenerateEye);
    }
    Ok((eye[1].distance(eye[5]) + eye[2].distance(eye[4])) / (2.0 * horizontal))
}

/// Head and nose sizes as signed coordinate differences:
/// H_W = P8.x − P6.x, H_H = P9.y − P7.y, N_W = P12.x − P10.x,
/// N_H = P13.y − P11.y. No absolute value is taken.
pub fn compute_sizes(frame: &LandmarkFrame) -> Result<(f64, f64, f64, f64)> {
    if !frame.valid {
        return Err(DeriveError::InvalidFrame);
    }
    let p = &frame.points;
    Ok((
        p[8].x - p[6].x,
        p[9].y - p[7].y,
        p[12].x - p[10].x,
        p[13].y - p[11].y,
    ))
}

/// Result of a z-score normalization, including the statistics used and
/// whether the zero-variance fallback (all zeros) was applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub zero_variance: bool,
}

/// (x − μ) / σ per element. Statistics are computed from the series
/// itself when not provided. A zero σ yields all zeros with the
/// `zero_variance` flag set instead of failing.
pub fn zscore_normalize(series: &[f64], stats: Option<(f64, f64)>) -> Result<Normalized> {
    if series.is_empty() {
        return Err(DeriveError::EmptySeries);
    }
    let (mu, sigma) = stats.unwrap_or_else(|| (mean(series), std_pop(series)));
    if sigma == 0.0 {
        return Ok(Normalized {
            values: vec![0.0; series.len()],
            mean: mu,
            std: sigma,
            zero_variance: true,
        });
    }
    Ok(Normalized {
        values: series.iter().map(|v| (v - mu) / sigma).collect(),
        mean: mu,
        std: sigma,
        zero_variance: false,
    })
}

impl DerivedFrameFeatures {
    /// Raw (un-normalized) features from one valid landmark frame.
    /// A valid frame with a degenerate eye violates the landmark schema
    /// invariant and reports `DegenerateEye`.
    pub fn from_landmarks(frame: &LandmarkFrame) -> Result<Self> {
        let eye: [Point2; 6] = frame.points[0..6].try_into().unwrap();
        let ear = compute_ear(&eye)?;
        let (head_width, head_height, nose_width, nose_height) = compute_sizes(frame)?;
        Ok(DerivedFrameFeatures {
            ear_right: ear,
            ear_left: ear,
            head_width,
            head_height,
            nose_width,
            nose_height,
        })
    }
}

/// Derive EAR, HS, and NS tracks from a user's landmark frames and merge
/// them into `stream` under the given session, replacing any same-category
/// tracks. HS and NS are z-score normalized per user session (head size
/// depends on anatomy and camera placement; a global normalization would
/// encode identity). Invalid frames produce no samples, so their seconds
/// fall through to the missing-second handling downstream.
///
/// Returns the number of frames skipped (invalid or degenerate).
pub fn merge_landmark_features(
    stream: &mut FrameFeatureStream,
    frames: &[LandmarkFrame],
    session_of_user: &BTreeMap<String, String>,
) -> usize {
    // user -> (timestamps, ear2, raw hs2, raw ns2)
    #[derive(Default)]
    struct PerUser {
        timestamps: Vec<f64>,
        ear: Vec<[f64; 2]>,
        hs: Vec<[f64; 2]>,
        ns: Vec<[f64; 2]>,
    }
    let mut per_user: BTreeMap<String, PerUser> = BTreeMap::new();
    let mut skipped = 0usize;
    for frame in frames {
        if !frame.valid {
            skipped += 1;
            continue;
        }
        match DerivedFrameFeatures::from_landmarks(frame) {
            Ok(d) => {
                let u = per_user.entry(frame.user_id.clone()).or_default();
                u.timestamps.push(frame.timestamp);
                u.ear.push([d.ear_right, d.ear_left]);
                u.hs.push([d.head_width, d.head_height]);
                u.ns.push([d.nose_width, d.nose_height]);
            }
            Err(_) => skipped += 1,
        }
    }
    for (user, data) in per_user {
        let session = session_of_user
            .get(&user)
            .cloned()
            .unwrap_or_else(|| "lm".to_string());
        let n = data.timestamps.len();
        let mut tracks: Vec<(Category, Mat)> = Vec::new();
        for (cat, cols, normalize) in [
            (Category::Ear, &data.ear, false),
            (Category::Hs, &data.hs, true),
            (Category::Ns, &data.ns, true),
        ] {
            let mut m = Mat::zeros(n, 2);
            for d in 0..2 {
                let series: Vec<f64> = cols.iter().map(|r| r[d]).collect();
                let values = if normalize {
                    zscore_normalize(&series, None).expect("non-empty by construction").values
                } else {
                    series
                };
                for (i, v) in values.into_iter().enumerate() {
                    m.set(i, d, v);
                }
            }
            tracks.push((cat, m));
        }
        for (cat, values) in tracks {
            stream.replace_track(
                &user,
                &session,
                cat,
                CategoryTrack {
                    timestamps: data.timestamps.clone(),
                    values,
                },
            );
        }
    }
    skipped
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    #[test]
    fn ear_closed_eye_is_zero() {
        let eye = [pt(0.0, 0.0), pt(0.5, 0.0), pt(1.5, 0.0), pt(2.0, 0.0), pt(1.5, 0.0), pt(0.5, 0.0)];
        assert_eq!(compute_ear(&eye).unwrap(), 0.0);
    }

    #[test]
    fn ear_direct_arithmetic() {
        let eye = [
            pt(0.0, 0.0),
            pt(0.5, 0.5),
            pt(1.5, 0.5),
            pt(2.0, 0.0),
            pt(1.5, -0.5),
            pt(0.5, -0.5),
        ];
        assert_eq!(compute_ear(&eye).unwrap(), 0.5);
    }

    #[test]
    fn ear_degenerate_when_p0_equals_p3() {
        let eye = [pt(1.0, 1.0); 6];
        assert!(matches!(compute_ear(&eye), Err(DeriveError::DegenerateEye)));
    }

    fn frame_with(points: [Point2; 14], valid: bool) -> LandmarkFrame {
        LandmarkFrame {
            user_id: "u".into(),
            timestamp: 0.0,
            valid,
            points,
        }
    }

    #[test]
    fn sizes_are_signed_differences() {
        let mut points = [pt(0.0, 0.0); 14];
        points[6] = pt(10.0, 0.0);
        points[8] = pt(110.0, 0.0);
        points[7] = pt(0.0, 20.0);
        points[9] = pt(0.0, 140.0);
        points[10] = pt(40.0, 0.0);
        points[12] = pt(70.0, 0.0);
        points[11] = pt(0.0, 50.0);
        points[13] = pt(0.0, 90.0);
        let (hw, hh, nw, nh) = compute_sizes(&frame_with(points, true)).unwrap();
        assert_eq!((hw, hh, nw, nh), (100.0, 120.0, 30.0, 40.0));
    }

    #[test]
    fn sizes_all_identical_points_are_zero() {
        let (hw, hh, nw, nh) = compute_sizes(&frame_with([pt(3.0, 4.0); 14], true)).unwrap();
        assert_eq!((hw, hh, nw, nh), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn sizes_invalid_frame_errors() {
        let err = compute_sizes(&frame_with([pt(0.0, 0.0); 14], false)).unwrap_err();
        assert!(matches!(err, DeriveError::InvalidFrame));
    }

    #[test]
    fn zscore_self_stats() {
        let n = zscore_normalize(&[1.0, 2.0, 3.0], None).unwrap();
        assert!(!n.zero_variance);
        assert!(mean(&n.values).abs() < 1e-12);
        assert!((std_pop(&n.values) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zscore_constant_series_flags_zero_variance() {
        let n = zscore_normalize(&[5.0, 5.0, 5.0], None).unwrap();
        assert!(n.zero_variance);
        assert_eq!(n.values, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn zscore_with_provided_stats() {
        let n = zscore_normalize(&[2.0], Some((1.0, 2.0))).unwrap();
        assert_eq!(n.values, vec![0.5]);
    }

    proptest! {
        // EAR is a ratio of distances: invariant under rotation and
        // uniform scaling of the six points.
        #[test]
        fn ear_rigid_motion_invariance(
            xs in proptest::collection::vec(-50.0f64..50.0, 6),
            ys in proptest::collection::vec(-50.0f64..50.0, 6),
            angle in 0.0f64..std::f64::consts::TAU,
            scale in 0.1f64..10.0,
        ) {
            let eye: Vec<Point2> = xs.iter().zip(&ys).map(|(&x, &y)| pt(x, y)).collect();
            let eye: [Point2; 6] = eye.try_into().unwrap();
            prop_assume!(eye[0].distance(eye[3]) > 1e-6);
            let (s, c) = angle.sin_cos();
            let moved: Vec<Point2> = eye
                .iter()
                .map(|p| pt(scale * (c * p.x - s * p.y) + 7.0, scale * (s * p.x + c * p.y) - 3.0))
                .collect();
            let moved: [Point2; 6] = moved.try_into().unwrap();
            let a = compute_ear(&eye).unwrap();
            let b = compute_ear(&moved).unwrap();
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        }

        // compute_sizes is linear in the coordinates.
        #[test]
        fn sizes_scale_linearly(
            coords in proptest::collection::vec(-100.0f64..100.0, 28),
            k in 0.1f64..8.0,
        ) {
            let mut points = [pt(0.0, 0.0); 14];
            let mut scaled = points;
            for i in 0..14 {
                points[i] = pt(coords[2 * i], coords[2 * i + 1]);
                scaled[i] = pt(k * coords[2 * i], k * coords[2 * i + 1]);
            }
            let a = compute_sizes(&frame_with(points, true)).unwrap();
            let b = compute_sizes(&frame_with(scaled, true)).unwrap();
            for (x, y) in [(a.0, b.0), (a.1, b.1), (a.2, b.2), (a.3, b.3)] {
                prop_assert!((k * x - y).abs() < 1e-9 * (1.0 + x.abs() * k));
            }
        }

        // Normalizing twice with self-stats equals normalizing once.
        #[test]
        fn zscore_idempotent(series in proptest::collection::vec(-1000.0f64..1000.0, 2..64)) {
            let once = zscore_normalize(&series, None).unwrap();
            let twice = zscore_normalize(&once.values, None).unwrap();
            for (a, b) in once.values.iter().zip(&twice.values) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
