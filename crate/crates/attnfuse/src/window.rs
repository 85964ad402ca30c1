//! Per-second averaging, percentile label thresholds, and sliding-window
//! extraction with high/low labeling.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{AttentionSeries, CategoryTrack};
use crate::mat::Mat;
use crate::types::{Category, Label};

#[derive(Debug, Error)]
pub enum WindowError {
    #[error("empty session: no frames to average")]
    EmptySession,
    #[error("empty attention pool")]
    EmptyPool,
    #[error("degenerate attention distribution: low and high thresholds coincide at {0}")]
    DegenerateDistribution(f64),
    #[error("window of {window}s is longer than the {session}s session")]
    WindowLongerThanSession { window: usize, session: usize },
    #[error("invalid labeling config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, WindowError>;

/// Windowing and labeling parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelingConfig {
    /// Window length in seconds (stride is fixed at 1 s).
    pub window_length: usize,
    pub low_percentile: f64,
    pub high_percentile: f64,
    /// Windows with a larger fraction of missing seconds are dropped.
    pub max_missing_fraction: f64,
}

impl Default for LabelingConfig {
    fn default() -> Self {
        LabelingConfig {
            window_length: 60,
            low_percentile: 10.0,
            high_percentile: 90.0,
            max_missing_fraction: 0.1,
        }
    }
}

impl LabelingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_length < 1 {
            return Err(WindowError::InvalidConfig("window_length must be >= 1".into()));
        }
        if !(self.low_percentile > 0.0 && self.low_percentile < self.high_percentile && self.high_percentile < 100.0)
        {
            return Err(WindowError::InvalidConfig(format!(
                "percentiles must satisfy 0 < low ({}) < high ({}) < 100",
                self.low_percentile, self.high_percentile
            )));
        }
        if !(0.0..=1.0).contains(&self.max_missing_fraction) {
            return Err(WindowError::InvalidConfig(
                "max_missing_fraction must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// One category's per-second feature means for a session: an N x T matrix
/// (N = category dimension, T = whole seconds), with per-second sample
/// counts. Seconds without any frame are filled by carrying the last
/// observation forward (the first observation backward at the session
/// start) and flagged missing.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondFeatureSeries {
    pub user_id: String,
    pub category: Category,
    /// Row n = channel n over time; column t = second t.
    pub values: Mat,
    pub counts: Vec<u32>,
    pub missing: Vec<bool>,
}

impl SecondFeatureSeries {
    pub fn seconds(&self) -> usize {
        self.counts.len()
    }
}

/// Average all frames of a track into per-second columns.
pub fn per_second_average(
    user_id: &str,
    category: Category,
    track: &CategoryTrack,
) -> Result<SecondFeatureSeries> {
    if track.is_empty() {
        return Err(WindowError::EmptySession);
    }
    let dim = category.dim();
    let seconds = track.timestamps.last().copied().unwrap_or(0.0).floor() as usize + 1;
    let mut sums = Mat::zeros(dim, seconds);
    let mut counts = vec![0u32; seconds];
    for (i, &ts) in track.timestamps.iter().enumerate() {
        let t = (ts.floor() as usize).min(seconds - 1);
        counts[t] += 1;
        let row = track.values.row(i);
        for (d, &v) in row.iter().enumerate() {
            sums.set(d, t, sums.get(d, t) + v);
        }
    }
    let mut missing = vec![false; seconds];
    let first_observed = counts.iter().position(|&c| c > 0).expect("non-empty track");
    for t in 0..seconds {
        if counts[t] > 0 {
            for d in 0..dim {
                sums.set(d, t, sums.get(d, t) / f64::from(counts[t]));
            }
        } else {
            missing[t] = true;
            let src = if t == 0 { first_observed } else { t - 1 };
            for d in 0..dim {
                let v = sums.get(d, src);
                sums.set(d, t, v);
            }
        }
    }
    // Backfill any leading gap from the first observed second. Later
    // gaps were already resolved left to right above.
    for t in (0..first_observed).rev() {
        for d in 0..dim {
            let v = sums.get(d, first_observed);
            sums.set(d, t, v);
        }
    }
    Ok(SecondFeatureSeries {
        user_id: user_id.to_string(),
        category,
        values: sums,
        counts,
        missing,
    })
}

/// Linear-interpolation percentile over a sorted slice (the `(n-1)p`
/// order-statistic convention).
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = rank - lo as f64;
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Low/high label thresholds from a pooled set of per-second attention
/// values.
pub fn compute_label_thresholds(pool: &[f64], config: &LabelingConfig) -> Result<(f64, f64)> {
    if pool.is_empty() {
        return Err(WindowError::EmptyPool);
    }
    let mut sorted = pool.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite attention values"));
    let tau_low = percentile(&sorted, config.low_percentile);
    let tau_high = percentile(&sorted, config.high_percentile);
    if tau_low == tau_high {
        return Err(WindowError::DegenerateDistribution(tau_low));
    }
    Ok((tau_low, tau_high))
}

/// Label rule: Low iff band <= tau_low, High iff band >= tau_high.
pub fn label_for(band_attention: f64, thresholds: (f64, f64)) -> Option<Label> {
    let (tau_low, tau_high) = thresholds;
    if band_attention <= tau_low {
        Some(Label::Low)
    } else if band_attention >= tau_high {
        Some(Label::High)
    } else {
        None
    }
}

/// One candidate window position, before labeling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub start: usize,
    pub band_attention: f64,
    pub missing_fraction: f64,
}

/// All candidate windows (one per start second) over the common span of
/// the per-category series and the attention series. The band attention
/// is the arithmetic mean of the window's per-second attention values;
/// the missing fraction counts seconds where any category is missing.
pub fn extract_candidates(
    seconds: &BTreeMap<Category, SecondFeatureSeries>,
    attention: &AttentionSeries,
    config: &LabelingConfig,
) -> Result<Vec<Candidate>> {
    config.validate()?;
    if seconds.is_empty() {
        return Err(WindowError::EmptySession);
    }
    let w = config.window_length;
    let t_total = seconds
        .values()
        .map(SecondFeatureSeries::seconds)
        .chain(std::iter::once(attention.values.len()))
        .min()
        .unwrap_or(0);
    if t_total < w {
        return Err(WindowError::WindowLongerThanSession {
            window: w,
            session: t_total,
        });
    }
    let mut missing_any = vec![false; t_total];
    for series in seconds.values() {
        for (t, flag) in missing_any.iter_mut().enumerate() {
            *flag |= series.missing[t];
        }
    }
    // prefix sums for O(1) window means
    let mut att_prefix = vec![0.0f64; t_total + 1];
    let mut miss_prefix = vec![0usize; t_total + 1];
    for t in 0..t_total {
        att_prefix[t + 1] = att_prefix[t] + attention.values[t];
        miss_prefix[t + 1] = miss_prefix[t] + usize::from(missing_any[t]);
    }
    let mut out = Vec::with_capacity(t_total - w + 1);
    for s in 0..=(t_total - w) {
        out.push(Candidate {
            start: s,
            band_attention: (att_prefix[s + w] - att_prefix[s]) / w as f64,
            missing_fraction: (miss_prefix[s + w] - miss_prefix[s]) as f64 / w as f64,
        });
    }
    Ok(out)
}

/// One labeled sliding window with its per-category local vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub user_id: String,
    pub start_second: usize,
    pub label: Label,
    /// Mean attention over the window.
    pub band_attention: f64,
    /// Per-category N x W_l matrices.
    pub locals: BTreeMap<Category, Mat>,
}

/// Materialize the local vectors of one candidate from the per-second
/// series (columns start..start+W of each category).
pub fn materialize_window(
    seconds: &BTreeMap<Category, SecondFeatureSeries>,
    user_id: &str,
    candidate: &Candidate,
    label: Label,
    window_length: usize,
) -> WindowSample {
    let mut locals = BTreeMap::new();
    for (&cat, series) in seconds {
        let n = cat.dim();
        let mut m = Mat::zeros(n, window_length);
        for d in 0..n {
            for k in 0..window_length {
                m.set(d, k, series.values.get(d, candidate.start + k));
            }
        }
        locals.insert(cat, m);
    }
    WindowSample {
        user_id: user_id.to_string(),
        start_second: candidate.start,
        label,
        band_attention: candidate.band_attention,
        locals,
    }
}

/// Extract the labeled windows of one session: one candidate per start
/// second, kept when its band attention reaches a threshold and its
/// missing fraction is within bounds.
pub fn extract_windows(
    seconds: &BTreeMap<Category, SecondFeatureSeries>,
    attention: &AttentionSeries,
    config: &LabelingConfig,
    thresholds: (f64, f64),
) -> Result<Vec<WindowSample>> {
    let candidates = extract_candidates(seconds, attention, config)?;
    let mut out = Vec::new();
    for cand in &candidates {
        if cand.missing_fraction > config.max_missing_fraction {
            continue;
        }
        if let Some(label) = label_for(cand.band_attention, thresholds) {
            out.push(materialize_window(
                seconds,
                &attention.user_id,
                cand,
                label,
                config.window_length,
            ));
        }
    }
    Ok(out)
}

/// Write windows as JSON Lines, one `WindowSample` per line.
pub fn write_windows_jsonl<W: std::io::Write>(
    samples: &[WindowSample],
    w: &mut W,
) -> std::io::Result<()> {
    for s in samples {
        serde_json::to_writer(&mut *w, s)?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_windows_jsonl<R: std::io::BufRead>(r: R) -> std::io::Result<Vec<WindowSample>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::Mat;
    use proptest::prelude::*;

    fn track(times: &[f64], values: &[f64]) -> CategoryTrack {
        let mut m = Mat::with_cols(1);
        for v in values {
            m.push_row(&[*v]);
        }
        CategoryTrack {
            timestamps: times.to_vec(),
            values: m,
        }
    }

    #[test]
    fn per_second_mean() {
        let t = track(&[0.1, 0.6], &[0.8, 1.0]);
        let s = per_second_average("u", Category::Eb, &t).unwrap();
        assert_eq!(s.values.get(0, 0), 0.9);
        assert_eq!(s.counts, vec![2]);
    }

    #[test]
    fn missing_second_carries_last_observation() {
        let t = track(&[0.5, 2.5], &[0.7, 0.3]);
        let s = per_second_average("u", Category::Eb, &t).unwrap();
        assert_eq!(s.seconds(), 3);
        assert_eq!(s.values.get(0, 1), 0.7);
        assert_eq!(s.missing, vec![false, true, false]);
    }

    #[test]
    fn leading_gap_backfills_from_first_observation() {
        let t = track(&[2.5], &[0.4]);
        let s = per_second_average("u", Category::Eb, &t).unwrap();
        assert_eq!(s.values.get(0, 0), 0.4);
        assert_eq!(s.missing, vec![true, true, false]);
    }

    #[test]
    fn empty_track_is_empty_session() {
        let t = CategoryTrack {
            timestamps: vec![],
            values: Mat::with_cols(1),
        };
        assert!(matches!(
            per_second_average("u", Category::Eb, &t),
            Err(WindowError::EmptySession)
        ));
    }

    #[test]
    fn thresholds_on_uniform_grid() {
        let pool: Vec<f64> = (0..=100).map(f64::from).collect();
        let cfg = LabelingConfig::default();
        let (lo, hi) = compute_label_thresholds(&pool, &cfg).unwrap();
        assert_eq!((lo, hi), (10.0, 90.0));
    }

    #[test]
    fn thresholds_degenerate_pool() {
        let pool = vec![55.0; 40];
        let err = compute_label_thresholds(&pool, &LabelingConfig::default()).unwrap_err();
        assert!(matches!(err, WindowError::DegenerateDistribution(v) if v == 55.0));
    }

    /// Straightforward percentile oracle: sort, take the (n-1)p rank,
    /// interpolate linearly between the bracketing order statistics.
    fn percentile_oracle(pool: &[f64], p: f64) -> f64 {
        let mut v = pool.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let rank = p / 100.0 * (v.len() - 1) as f64;
        let lo = rank.floor() as usize;
        let frac = rank - lo as f64;
        if lo + 1 < v.len() {
            v[lo] * (1.0 - frac) + v[lo + 1] * frac
        } else {
            v[lo]
        }
    }

    #[test]
    fn thresholds_on_tie_heavy_pool_match_oracle() {
        // 0..9 once each, 50 eighty times, 91..100 once each
        let mut pool: Vec<f64> = (0..10).map(f64::from).collect();
        pool.extend(std::iter::repeat_n(50.0, 80));
        pool.extend((91..=100).map(f64::from));
        let cfg = LabelingConfig::default();
        let (lo, hi) = compute_label_thresholds(&pool, &cfg).unwrap();
        // frozen from the oracle below: rank 9.9 -> 9 + 0.9*(50-9), rank 89.1 -> 50 + 0.1*(91-50)
        assert!((lo - 45.9).abs() < 1e-12);
        assert!((hi - 54.1).abs() < 1e-12);
        assert!((lo - percentile_oracle(&pool, 10.0)).abs() < 1e-12);
        assert!((hi - percentile_oracle(&pool, 90.0)).abs() < 1e-12);
    }

    fn series_of(values: &[f64], category: Category) -> SecondFeatureSeries {
        let t = values.len();
        let mut m = Mat::zeros(category.dim(), t);
        for d in 0..category.dim() {
            for (i, v) in values.iter().enumerate() {
                m.set(d, i, *v);
            }
        }
        SecondFeatureSeries {
            user_id: "u".into(),
            category,
            values: m,
            counts: vec![1; t],
            missing: vec![false; t],
        }
    }

    fn one_category_map(values: &[f64]) -> BTreeMap<Category, SecondFeatureSeries> {
        let mut map = BTreeMap::new();
        map.insert(Category::Eb, series_of(values, Category::Eb));
        map
    }

    #[test]
    fn candidate_count_is_t_minus_w_plus_1() {
        let att = AttentionSeries {
            user_id: "u".into(),
            values: vec![50.0; 120],
        };
        let vals = vec![0.5; 120];
        let cfg = LabelingConfig {
            window_length: 30,
            ..Default::default()
        };
        let cands = extract_candidates(&one_category_map(&vals), &att, &cfg).unwrap();
        assert_eq!(cands.len(), 91);
    }

    #[test]
    fn constant_mid_attention_yields_no_labels() {
        let att = AttentionSeries {
            user_id: "u".into(),
            values: vec![50.0; 100],
        };
        let vals = vec![0.5; 100];
        let cfg = LabelingConfig {
            window_length: 30,
            ..Default::default()
        };
        let windows = extract_windows(&one_category_map(&vals), &att, &cfg, (30.0, 70.0)).unwrap();
        assert!(windows.is_empty());
    }

    #[test]
    fn window_longer_than_session_errors() {
        let att = AttentionSeries {
            user_id: "u".into(),
            values: vec![50.0; 20],
        };
        let vals = vec![0.5; 20];
        let cfg = LabelingConfig {
            window_length: 30,
            ..Default::default()
        };
        let err = extract_candidates(&one_category_map(&vals), &att, &cfg).unwrap_err();
        assert!(matches!(err, WindowError::WindowLongerThanSession { .. }));
    }

    #[test]
    fn labels_and_shapes_are_consistent() {
        // attention: 40 low seconds, 40 mid, 40 high
        let mut att_vals = vec![5.0; 40];
        att_vals.extend(vec![50.0; 40]);
        att_vals.extend(vec![95.0; 40]);
        let att = AttentionSeries {
            user_id: "u".into(),
            values: att_vals,
        };
        let mut seconds = BTreeMap::new();
        let vals = vec![0.5; 120];
        seconds.insert(Category::Eb, series_of(&vals, Category::Eb));
        seconds.insert(Category::Exp, series_of(&vals, Category::Exp));
        let cfg = LabelingConfig {
            window_length: 10,
            ..Default::default()
        };
        let windows = extract_windows(&seconds, &att, &cfg, (5.0, 95.0)).unwrap();
        assert!(!windows.is_empty());
        for w in &windows {
            assert_eq!(label_for(w.band_attention, (5.0, 95.0)), Some(w.label));
            assert_eq!(w.locals[&Category::Eb].rows(), 1);
            assert_eq!(w.locals[&Category::Eb].cols(), 10);
            assert_eq!(w.locals[&Category::Exp].rows(), 16);
            assert_eq!(w.locals[&Category::Exp].cols(), 10);
        }
        // windows entirely inside the low block are Low, inside high are High
        assert!(windows.iter().any(|w| w.label == Label::Low));
        assert!(windows.iter().any(|w| w.label == Label::High));
    }

    #[test]
    fn windows_with_excess_missing_are_dropped() {
        let att = AttentionSeries {
            user_id: "u".into(),
            values: vec![95.0; 40],
        };
        let mut series = series_of(&vec![0.5; 40], Category::Eb);
        for t in 0..20 {
            series.missing[t] = true;
        }
        let mut map = BTreeMap::new();
        map.insert(Category::Eb, series);
        let cfg = LabelingConfig {
            window_length: 10,
            max_missing_fraction: 0.1,
            ..Default::default()
        };
        let windows = extract_windows(&map, &att, &cfg, (5.0, 90.0)).unwrap();
        // seconds 0..20 are missing: a 10 s window tolerates at most one,
        // so the earliest surviving start is 19
        assert!(windows.iter().all(|w| w.start_second >= 19));
        assert!(windows.iter().any(|w| w.start_second == 19));
        assert!(!windows.is_empty());
    }

    #[test]
    fn jsonl_round_trip() {
        let att = AttentionSeries {
            user_id: "u7".into(),
            values: vec![95.0; 30],
        };
        let cfg = LabelingConfig {
            window_length: 10,
            ..Default::default()
        };
        let windows =
            extract_windows(&one_category_map(&vec![0.25; 30]), &att, &cfg, (5.0, 90.0)).unwrap();
        let mut buf = Vec::new();
        write_windows_jsonl(&windows, &mut buf).unwrap();
        let back = read_windows_jsonl(std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(windows, back);
    }

    proptest! {
        // Shifting the attention series by a constant shifts both
        // thresholds by the same constant and leaves the labeled set
        // unchanged.
        #[test]
        fn threshold_shift_invariance(
            raw in proptest::collection::vec(0.0f64..60.0, 50..200),
            shift in 0.0f64..40.0,
        ) {
            let cfg = LabelingConfig { window_length: 10, ..Default::default() };
            let shifted: Vec<f64> = raw.iter().map(|v| v + shift).collect();
            let t0 = compute_label_thresholds(&raw, &cfg);
            let t1 = compute_label_thresholds(&shifted, &cfg);
            let (Ok((l0, h0)), Ok((l1, h1))) = (t0, t1) else {
                return Ok(()); // degenerate pool: both degenerate or filtered
            };
            prop_assert!((l1 - (l0 + shift)).abs() < 1e-9);
            prop_assert!((h1 - (h0 + shift)).abs() < 1e-9);

            let att0 = AttentionSeries { user_id: "u".into(), values: raw.clone() };
            let att1 = AttentionSeries { user_id: "u".into(), values: shifted };
            let map = one_category_map(&vec![0.5; raw.len()]);
            let w0 = extract_windows(&map, &att0, &cfg, (l0, h0)).unwrap();
            let w1 = extract_windows(&map, &att1, &cfg, (l1, h1)).unwrap();
            let k0: Vec<(usize, Label)> = w0.iter().map(|w| (w.start_second, w.label)).collect();
            let k1: Vec<(usize, Label)> = w1.iter().map(|w| (w.start_second, w.label)).collect();
            prop_assert_eq!(k0, k1);
        }

        #[test]
        fn candidate_count_property(
            t in 10usize..200,
            w in 1usize..10,
        ) {
            let att = AttentionSeries { user_id: "u".into(), values: vec![50.0; t] };
            let cfg = LabelingConfig { window_length: w, ..Default::default() };
            let cands = extract_candidates(&one_category_map(&vec![0.1; t]), &att, &cfg).unwrap();
            prop_assert_eq!(cands.len(), t - w + 1);
        }
    }
}
