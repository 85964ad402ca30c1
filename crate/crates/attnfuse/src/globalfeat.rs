//! The 28 per-channel statistical descriptors computed over a window:
//! velocity/acceleration/jerk statistics, peak locations, ranges, and
//! ratio features, applied to each channel of a local vector.
//!
//! Conventions pinned here for the 1-D setting:
//! - derivatives are forward differences with a 1 s step;
//! - tangential acceleration is the first difference of |v|, centripetal
//!   acceleration is sqrt(max(a^2 - a_t^2, 0)) on the shared index range;
//! - a local maximum is strictly greater than both neighbours, a plateau
//!   counts once at its first index, and sequence endpoints never count;
//! - any ratio with a zero denominator is defined as 0;
//! - means, RMS, and standard deviations use the population (divide-by-n)
//!   convention; argmax times are normalized by the length of the
//!   respective derivative, peak locations by (len(x) - 1).

use thiserror::Error;

use crate::mat::{mean, std_pop, Mat};

pub const GLOBAL_FEATURES: usize = 28;

#[derive(Debug, Error)]
pub enum FeatError {
    #[error("channel of length {0} is too short (need >= 4 for jerk)")]
    TooShort(usize),
}

pub type Result<T> = std::result::Result<T, FeatError>;

/// Forward-difference derivative chain of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicDerivatives {
    pub x: Vec<f64>,
    /// First difference, length len(x) - 1.
    pub v: Vec<f64>,
    /// Second difference, length len(x) - 2.
    pub a: Vec<f64>,
    /// First difference of |v|, length len(x) - 2.
    pub a_t: Vec<f64>,
    /// sqrt(max(a^2 - a_t^2, 0)) elementwise, length len(x) - 2.
    pub a_c: Vec<f64>,
    /// Third difference, length len(x) - 3.
    pub j: Vec<f64>,
}

fn diff(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

pub fn kinematics(x: &[f64]) -> Result<KinematicDerivatives> {
    if x.len() < 4 {
        return Err(FeatError::TooShort(x.len()));
    }
    let v = diff(x);
    let a = diff(&v);
    let speed: Vec<f64> = v.iter().map(|&vi| vi.abs()).collect();
    let a_t = diff(&speed);
    let a_c: Vec<f64> = a
        .iter()
        .zip(&a_t)
        .map(|(&ai, &ti)| (ai * ai - ti * ti).max(0.0).sqrt())
        .collect();
    let j = diff(&a);
    Ok(KinematicDerivatives {
        x: x.to_vec(),
        v,
        a,
        a_t,
        a_c,
        j,
    })
}

/// Local maxima of a sequence as (first index, value), in index order.
/// Strictly greater than both neighbours; an interior plateau counts once
/// at its first index; endpoints never count.
pub fn local_maxima(x: &[f64]) -> Vec<(usize, f64)> {
    let n = x.len();
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[j + 1] == x[i] {
            j += 1;
        }
        if i > 0 && j + 1 < n && x[i - 1] < x[i] && x[j + 1] < x[i] {
            peaks.push((i, x[i]));
        }
        i = j + 1;
    }
    peaks
}

fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn max_signed(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// First index of the maximum of |x|.
fn argmax_abs(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in x.iter().enumerate() {
        if v.abs() > x[best].abs() {
            best = i;
        }
    }
    best
}

fn argmax_signed(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in x.iter().enumerate() {
        if *v > x[best] {
            best = i;
        }
    }
    best
}

/// Ratio with the zero-denominator rule: anything over 0 is 0.
fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// The 28 global features of one channel, in order g1..g28.
pub fn global_features(x: &[f64]) -> Result<[f64; GLOBAL_FEATURES]> {
    let k = kinematics(x)?;
    let n = x.len();
    let v = &k.v;
    let a = &k.a;
    let j = &k.j;

    let pos_sum: f64 = v.iter().filter(|&&vi| vi > 0.0).sum();
    let neg_sum: f64 = v.iter().filter(|&&vi| vi < 0.0).sum();
    let pos_count = v.iter().filter(|&&vi| vi > 0.0).count();
    let neg_count = v.iter().filter(|&&vi| vi < 0.0).count();

    let peaks = {
        let mut p = local_maxima(x);
        // rank by value descending, ties by earlier index
        p.sort_by(|l, r| r.1.partial_cmp(&l.1).unwrap().then(l.0.cmp(&r.0)));
        p
    };
    let peak_count = local_maxima(x).len();
    let peak_loc = |rank: usize| -> f64 {
        peaks
            .get(rank)
            .map_or(0.0, |&(idx, _)| idx as f64 / (n - 1) as f64)
    };

    let v_mean = mean(v);
    let v_abs_max = max_abs(v);
    let v_max = max_signed(v);
    let a_abs_max = max_abs(a);
    let x_max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let x_min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let range = x_max - x_min;

    let sign_changes = {
        let nonzero: Vec<f64> = v.iter().copied().filter(|&vi| vi != 0.0).collect();
        nonzero.windows(2).filter(|w| w[0] * w[1] < 0.0).count()
    };

    let abs_j: Vec<f64> = j.iter().map(|&ji| ji.abs()).collect();

    Ok([
        pos_sum,                                                   // g1
        neg_sum,                                                   // g2
        peak_loc(0),                                               // g3
        peak_loc(1),                                               // g4
        peak_loc(2),                                               // g5
        ratio(v_mean, v_abs_max),                                  // g6
        ratio(v_mean, v_max),                                      // g7
        ratio(rms(v), v_abs_max),                                  // g8
        ratio(rms(&k.a_c), a_abs_max),                             // g9
        ratio(rms(&k.a_t), a_abs_max),                             // g10
        ratio(rms(a), a_abs_max),                                  // g11
        ratio(mean(&k.a_c), a_abs_max),                            // g12
        std_pop(v),                                                // g13
        std_pop(a),                                                // g14
        mean(&abs_j),                                              // g15
        mean(j),                                                   // g16
        max_abs(j),                                                // g17
        max_signed(j),                                             // g18
        rms(j),                                                    // g19
        argmax_abs(j) as f64 / j.len() as f64,                     // g20
        argmax_signed(j) as f64 / j.len() as f64,                  // g21
        sign_changes as f64,                                       // g22
        ratio(pos_sum, -neg_sum),                                  // g23
        ratio(pos_count as f64, neg_count as f64),                 // g24
        range,                                                     // g25
        ratio(v_mean, range),                                      // g26
        peak_count as f64,                                         // g27
        mean(&a.iter().map(|&ai| ai.abs()).collect::<Vec<f64>>()), // g28
    ])
}

/// Row-wise global features of a local vector: N x W_l in, N x 28 out.
pub fn global_vector(local: &Mat) -> Result<Mat> {
    let mut out = Mat::with_cols(GLOBAL_FEATURES);
    for row in local.iter_rows() {
        out.push_row(&global_features(row)?);
    }
    Ok(out)
}
