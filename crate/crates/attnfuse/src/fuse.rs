//! The three multimodal strategies: score sum (mean of normalized
//! category scores), neural-network score fusion, and
//! discrimination-power feature selection feeding a single SVM.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learn::MlpFusionModel;
use crate::mat::Mat;
use crate::types::{Category, Label};

/// Features with zero within-class variance but distinct class means
/// sort first via this sentinel.
pub const DP_CAP: f64 = 1e12;

#[derive(Debug, Error)]
pub enum FuseError {
    #[error("missing category {0} in score map")]
    MissingCategory(Category),
    #[error("wrong score arity: expected {expected}, got {got}")]
    WrongArity { expected: usize, got: usize },
    #[error("both classes must be present")]
    SingleClassInput,
    #[error("invalid fusion spec: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, FuseError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionStrategy {
    /// Mean of the selected categories' normalized scores (monotone
    /// equivalent of the plain sum for a fixed subset, and keeps the
    /// fused score in [0, 1]).
    Sum,
    /// 16-8-1 neural network over the 7 category scores.
    NeuralNet,
    /// Discrimination-power selection over concatenated global features,
    /// then one SVM.
    DpSelect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    Local,
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionSpec {
    pub strategy: FusionStrategy,
    pub categories: Vec<Category>,
    pub feature_mode: FeatureMode,
    pub dp_fraction: f64,
}

impl FusionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.categories.is_empty() {
            return Err(FuseError::InvalidSpec("categories must be non-empty".into()));
        }
        let mut seen = self.categories.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.categories.len() {
            return Err(FuseError::InvalidSpec("duplicate category".into()));
        }
        if !(self.dp_fraction > 0.0 && self.dp_fraction <= 1.0) {
            return Err(FuseError::InvalidSpec(format!(
                "dp_fraction {} outside (0, 1]",
                self.dp_fraction
            )));
        }
        match self.strategy {
            FusionStrategy::DpSelect if self.feature_mode != FeatureMode::Global => Err(
                FuseError::InvalidSpec("dp selection requires global features".into()),
            ),
            FusionStrategy::NeuralNet if self.categories.len() != Category::ALL.len() => {
                Err(FuseError::InvalidSpec(
                    "neural-network fusion consumes all 7 category scores".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

/// Mean of the selected categories' normalized scores. Summation runs
/// in canonical category order so the result is exactly independent of
/// the order the subset was written in.
pub fn score_sum(scores: &BTreeMap<Category, f64>, categories: &[Category]) -> Result<f64> {
    let mut subset = categories.to_vec();
    subset.sort();
    let mut total = 0.0;
    for cat in &subset {
        let s = scores.get(cat).ok_or(FuseError::MissingCategory(*cat))?;
        total += s;
    }
    Ok(total / subset.len() as f64)
}

/// Fused score from the trained network; expects exactly the 7 category
/// scores in canonical order (EB, EAR, HS, NS, HP, Exp, H).
pub fn nn_fuse(model: &MlpFusionModel, scores: &[f64]) -> Result<f64> {
    if scores.len() != Category::ALL.len() {
        return Err(FuseError::WrongArity {
            expected: Category::ALL.len(),
            got: scores.len(),
        });
    }
    Ok(model.forward(scores))
}

/// Per-feature discrimination power: inter-class variance over
/// intra-class variance, with the zero-denominator rules applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpStats {
    pub inter: Vec<f64>,
    pub intra: Vec<f64>,
    pub dp: Vec<f64>,
    /// Ascending indices of the selected features (empty until a
    /// selection is made).
    pub selected: Vec<usize>,
}

pub fn dp_rank(x: &Mat, y: &[Label]) -> Result<DpStats> {
    assert_eq!(x.rows(), y.len(), "one label per sample");
    let n = y.len();
    let n_high = y.iter().filter(|&&l| l == Label::High).count();
    let n_low = n - n_high;
    if n_high == 0 || n_low == 0 {
        return Err(FuseError::SingleClassInput);
    }
    let d = x.cols();
    let mut mean_all = vec![0.0; d];
    let mut mean_high = vec![0.0; d];
    let mut mean_low = vec![0.0; d];
    for (row, &label) in x.iter_rows().zip(y) {
        let class_mean = if label == Label::High { &mut mean_high } else { &mut mean_low };
        for ((all, cls), &v) in mean_all.iter_mut().zip(class_mean.iter_mut()).zip(row) {
            *all += v;
            *cls += v;
        }
    }
    for m in &mut mean_all {
        *m /= n as f64;
    }
    for m in &mut mean_high {
        *m /= n_high as f64;
    }
    for m in &mut mean_low {
        *m /= n_low as f64;
    }
    let mut intra = vec![0.0; d];
    for (row, &label) in x.iter_rows().zip(y) {
        let class_mean = if label == Label::High { &mean_high } else { &mean_low };
        for ((s, &m), &v) in intra.iter_mut().zip(class_mean).zip(row) {
            *s += (v - m) * (v - m);
        }
    }
    let mut inter = vec![0.0; d];
    let mut dp = vec![0.0; d];
    for j in 0..d {
        inter[j] = (n_low as f64 * (mean_low[j] - mean_all[j]).powi(2)
            + n_high as f64 * (mean_high[j] - mean_all[j]).powi(2))
            / n as f64;
        intra[j] /= n as f64;
        dp[j] = if intra[j] > 0.0 {
            inter[j] / intra[j]
        } else if inter[j] > 0.0 {
            DP_CAP
        } else {
            0.0
        };
    }
    Ok(DpStats {
        inter,
        intra,
        dp,
        selected: Vec::new(),
    })
}

/// Keep the ceil(fraction * D) features with the highest discrimination
/// power (ties to the lower index) and return the reduced matrix with
/// the surviving columns in ascending index order.
pub fn dp_select(x: &Mat, y: &[Label], fraction: f64) -> Result<(DpStats, Mat)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(FuseError::InvalidSpec(format!("fraction {fraction} outside (0, 1]")));
    }
    let mut stats = dp_rank(x, y)?;
    let d = x.cols();
    let keep = ((fraction * d as f64).ceil() as usize).clamp(1, d);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        stats.dp[b]
            .partial_cmp(&stats.dp[a])
            .expect("dp values are finite")
            .then(a.cmp(&b))
    });
    let mut selected: Vec<usize> = order[..keep].to_vec();
    selected.sort_unstable();
    let reduced = x.select_columns(&selected);
    stats.selected = selected;
    Ok((stats, reduced))
}
