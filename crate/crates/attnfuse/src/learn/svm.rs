//! Linear SVM trained by dual coordinate descent with shrinking
//! (L2-regularized hinge loss), plus the power-of-ten C grid search with
//! a user-grouped inner validation split.
//!
//! The bias is handled by feature augmentation: every sample gets an
//! implicit constant 1 feature, so the regularizer covers the bias term
//! as well and the dual stays box-constrained,
//! min_a 0.5 a'Qa - sum(a) with Q_ij = y_i y_j (x_i.x_j + 1), 0 <= a <= C.
//! Features are standardized internally; the stored model applies the
//! same transform at scoring time.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LearnError, Result};
use crate::mat::{axpy, dot, norm_sq, Mat};
use crate::types::Label;
use crate::util::{derive_seed, seeded_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    /// Stop when the maximal projected-gradient violation of a full pass
    /// drops below this.
    pub tol: f64,
    /// Cap on full coordinate passes over the data.
    pub max_passes: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            tol: 1e-3,
            max_passes: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    /// Weights over standardized features.
    pub w: Vec<f64>,
    pub b: f64,
    pub c: f64,
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
    pub passes: usize,
    pub converged: bool,
}

impl LinearSvmModel {
    /// Raw signed margin for one sample (unstandardized input).
    pub fn score(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.w.len());
        let mut s = self.b;
        for ((&xi, &m), (&sd, &wi)) in x
            .iter()
            .zip(&self.feature_means)
            .zip(self.feature_stds.iter().zip(&self.w))
        {
            s += wi * (xi - m) / sd;
        }
        s
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        if self.score(x) >= 0.0 {
            Label::High
        } else {
            Label::Low
        }
    }

    /// Training-set accuracy.
    pub fn accuracy(&self, x: &Mat, y: &[Label]) -> f64 {
        let correct = x
            .iter_rows()
            .zip(y)
            .filter(|(row, &label)| self.predict(row) == label)
            .count();
        correct as f64 / y.len() as f64
    }

    /// Primal objective 0.5 (||w||^2 + b^2) + C sum hinge, evaluated on
    /// the standardized training data.
    pub fn primal_objective(&self, x: &Mat, y: &[Label]) -> f64 {
        let mut hinge = 0.0;
        for (row, &label) in x.iter_rows().zip(y) {
            hinge += (1.0 - label.signum() * self.score(row)).max(0.0);
        }
        0.5 * (norm_sq(&self.w) + self.b * self.b) + self.c * hinge
    }
}

/// Per-pass values of the dual objective 0.5 ||w_aug||^2 - sum(alpha).
/// Exact single-coordinate minimization makes this nonincreasing.
#[derive(Debug, Clone, Default)]
pub struct TrainTrace {
    pub dual_objective: Vec<f64>,
}

fn standardize(x: &Mat) -> (Mat, Vec<f64>, Vec<f64>) {
    let n = x.rows();
    let d = x.cols();
    let mut means = vec![0.0; d];
    for row in x.iter_rows() {
        for (m, &v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut vars = vec![0.0; d];
    for row in x.iter_rows() {
        for ((s, &v), &m) in vars.iter_mut().zip(row).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    let stds: Vec<f64> = vars
        .iter()
        .map(|&s| {
            let sd = (s / n as f64).sqrt();
            if sd == 0.0 {
                1.0
            } else {
                sd
            }
        })
        .collect();
    let mut out = Mat::zeros(n, d);
    for i in 0..n {
        let row = x.row(i);
        let dst = out.row_mut(i);
        for j in 0..d {
            dst[j] = (row[j] - means[j]) / stds[j];
        }
    }
    (out, means, stds)
}

fn check_inputs(x: &Mat, y: &[Label]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(LearnError::InsufficientData(format!(
            "{} rows vs {} labels",
            x.rows(),
            y.len()
        )));
    }
    if x.data().iter().any(|v| !v.is_finite()) {
        return Err(LearnError::NonFiniteFeature);
    }
    let highs = y.iter().filter(|&&l| l == Label::High).count();
    if highs == 0 || highs == y.len() {
        return Err(LearnError::SingleClassInput);
    }
    Ok(())
}

pub fn train_linear_svm(x: &Mat, y: &[Label], cfg: &SvmConfig) -> Result<LinearSvmModel> {
    train_linear_svm_traced(x, y, cfg).map(|(m, _)| m)
}

pub fn train_linear_svm_traced(
    x: &Mat,
    y: &[Label],
    cfg: &SvmConfig,
) -> Result<(LinearSvmModel, TrainTrace)> {
    check_inputs(x, y)?;
    let (xs, means, stds) = standardize(x);
    let n = xs.rows();
    let d = xs.cols();
    let ys: Vec<f64> = y.iter().map(|l| l.signum()).collect();

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut alpha = vec![0.0; n];
    let mut sum_alpha = 0.0;
    // Q_ii with the augmented bias feature
    let q_diag: Vec<f64> = (0..n).map(|i| norm_sq(xs.row(i)) + 1.0).collect();

    let mut rng = seeded_rng(cfg.seed);
    let mut index: Vec<usize> = (0..n).collect();
    let mut active = n;
    let mut pg_max_old = f64::INFINITY;
    let mut pg_min_old = f64::NEG_INFINITY;
    let mut trace = TrainTrace::default();
    let mut passes = 0;
    let mut converged = false;

    while passes < cfg.max_passes {
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        for i in 0..active {
            let j = i + rng.random_range(0..active - i);
            index.swap(i, j);
        }
        let mut s = 0;
        while s < active {
            let i = index[s];
            let g = ys[i] * (dot(&w, xs.row(i)) + b) - 1.0;
            let mut pg = 0.0;
            if alpha[i] == 0.0 {
                if g > pg_max_old {
                    // shrink: this coordinate is pinned at its bound
                    active -= 1;
                    index.swap(s, active);
                    continue;
                }
                if g < 0.0 {
                    pg = g;
                }
            } else if alpha[i] == cfg.c {
                if g < pg_min_old {
                    active -= 1;
                    index.swap(s, active);
                    continue;
                }
                if g > 0.0 {
                    pg = g;
                }
            } else {
                pg = g;
            }
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / q_diag[i]).clamp(0.0, cfg.c);
                let delta = (alpha[i] - old) * ys[i];
                axpy(delta, xs.row(i), &mut w);
                b += delta;
                sum_alpha += alpha[i] - old;
            }
            s += 1;
        }
        passes += 1;
        trace
            .dual_objective
            .push(0.5 * (norm_sq(&w) + b * b) - sum_alpha);

        if pg_max - pg_min <= cfg.tol {
            if active == n {
                converged = true;
                break;
            }
            // converged on the shrunk problem: restore and re-check all
            active = n;
            pg_max_old = f64::INFINITY;
            pg_min_old = f64::NEG_INFINITY;
            continue;
        }
        pg_max_old = if pg_max <= 0.0 { f64::INFINITY } else { pg_max };
        pg_min_old = if pg_min >= 0.0 { f64::NEG_INFINITY } else { pg_min };
    }

    Ok((
        LinearSvmModel {
            w,
            b,
            c: cfg.c,
            feature_means: means,
            feature_stds: stds,
            passes,
            converged,
        },
        trace,
    ))
}

/// The searched regularization grid: 1e-8 to 1e2 in powers of ten.
pub fn default_c_grid() -> Vec<f64> {
    (-8..=2).map(|e| 10f64.powi(e)).collect()
}

#[derive(Debug, Clone)]
pub struct GridSearchOutcome {
    pub best_c: f64,
    pub model: LinearSvmModel,
    /// (C, inner validation accuracy) per grid point.
    pub scores: Vec<(f64, f64)>,
}

/// Select C by an inner validation split grouped by user (20% of the
/// training users held out), refit on everything with the winner.
/// Ties go to the smallest C. When a user-grouped split cannot give both
/// classes to the inner training side, falls back to a deterministic
/// stratified 80/20 sample split.
pub fn grid_search_c(
    x: &Mat,
    y: &[Label],
    groups: &[&str],
    grid: &[f64],
    base: &SvmConfig,
    split_seed: u64,
) -> Result<GridSearchOutcome> {
    check_inputs(x, y)?;
    assert_eq!(groups.len(), y.len(), "one group id per sample");
    let (train_idx, val_idx) = inner_split(y, groups, split_seed)?;

    let gather = |idx: &[usize]| -> (Mat, Vec<Label>) {
        let mut xm = Mat::with_cols(x.cols());
        let mut ym = Vec::with_capacity(idx.len());
        for &i in idx {
            xm.push_row(x.row(i));
            ym.push(y[i]);
        }
        (xm, ym)
    };
    let (x_tr, y_tr) = gather(&train_idx);
    let (x_val, y_val) = gather(&val_idx);

    let mut best: Option<(f64, f64)> = None; // (acc, c)
    let mut scores = Vec::with_capacity(grid.len());
    for &c in grid {
        let cfg = SvmConfig { c, ..base.clone() };
        let model = train_linear_svm(&x_tr, &y_tr, &cfg)?;
        let acc = model.accuracy(&x_val, &y_val);
        scores.push((c, acc));
        let better = match best {
            None => true,
            Some((best_acc, _)) => acc > best_acc,
        };
        if better {
            best = Some((acc, c));
        }
    }
    let (_, best_c) = best.expect("non-empty grid");
    let model = train_linear_svm(x, y, &SvmConfig { c: best_c, ..base.clone() })?;
    Ok(GridSearchOutcome {
        best_c,
        model,
        scores,
    })
}

/// Indices for the inner (train, validation) split.
fn inner_split(y: &[Label], groups: &[&str], split_seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let users: Vec<&str> = groups.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if users.len() >= 2 {
        for attempt in 0..8u64 {
            let mut shuffled = users.clone();
            let mut rng = seeded_rng(derive_seed(split_seed, &format!("inner-split:{attempt}")));
            for i in (1..shuffled.len()).rev() {
                let j = rng.random_range(0..=i);
                shuffled.swap(i, j);
            }
            let n_val = ((users.len() as f64 * 0.2).round() as usize).clamp(1, users.len() - 1);
            let val_users: BTreeSet<&str> = shuffled[..n_val].iter().copied().collect();
            let mut train_idx = Vec::new();
            let mut val_idx = Vec::new();
            for (i, g) in groups.iter().enumerate() {
                if val_users.contains(g) {
                    val_idx.push(i);
                } else {
                    train_idx.push(i);
                }
            }
            let highs = train_idx.iter().filter(|&&i| y[i] == Label::High).count();
            if !val_idx.is_empty() && highs > 0 && highs < train_idx.len() {
                return Ok((train_idx, val_idx));
            }
        }
    }
    // stratified sample split fallback
    let mut rng = seeded_rng(derive_seed(split_seed, "inner-split:samples"));
    let mut train_idx = Vec::new();
    let mut val_idx = Vec::new();
    for label in [Label::Low, Label::High] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == label).collect();
        if idx.len() < 2 {
            return Err(LearnError::InsufficientData(
                "need at least 2 samples per class for an inner split".into(),
            ));
        }
        for i in (1..idx.len()).rev() {
            let j = rng.random_range(0..=i);
            idx.swap(i, j);
        }
        let n_val = (idx.len() as f64 * 0.2).round().max(1.0) as usize;
        let n_val = n_val.min(idx.len() - 1);
        val_idx.extend_from_slice(&idx[..n_val]);
        train_idx.extend_from_slice(&idx[n_val..]);
    }
    train_idx.sort_unstable();
    val_idx.sort_unstable();
    Ok((train_idx, val_idx))
}

/// Min-max normalization of raw scores to [0, 1], fitted on the
/// training-fold scores; out-of-range test scores clip to the ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreNormalizer {
    pub min: f64,
    pub max: f64,
}

impl ScoreNormalizer {
    pub fn fit(train_scores: &[f64]) -> Self {
        let min = train_scores.iter().copied().fold(f64::INFINITY, f64::min);
        let max = train_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ScoreNormalizer { min, max }
    }

    pub fn apply(&self, s: f64) -> f64 {
        if self.max <= self.min {
            return 0.5; // degenerate training scores carry no information
        }
        ((s - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }
}
