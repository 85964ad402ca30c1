//! Leave-one-user-out cross-validation, max-accuracy thresholding,
//! ROC/AUC, and report assembly.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuse::{self, dp_select, FeatureMode, FusionSpec, FusionStrategy};
use crate::learn::{
    self, default_c_grid, grid_search_c, train_mlp, MlpFusionModel, MlpHyper, ScoreNormalizer,
    SvmConfig,
};
use crate::mat::Mat;
use crate::types::{Category, Label};
use crate::util::{derive_seed, fingerprint};
use crate::window::{compute_label_thresholds, label_for, LabelingConfig, WindowError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least 2 users for leave-one-out evaluation, got {0}")]
    InsufficientUsers(usize),
    #[error("both classes must be present")]
    SingleClassInput,
    #[error("fold {user}: {source}")]
    FoldTraining {
        user: String,
        source: learn::LearnError,
    },
    #[error("fold models do not match the dataset: {0}")]
    ModelMismatch(String),
    #[error(transparent)]
    Fusion(#[from] fuse::FuseError),
    #[error(transparent)]
    Window(#[from] WindowError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// Pick the decision threshold maximizing accuracy over midpoints of the
/// sorted unique scores plus sentinels below and above the score range
/// (predict High iff score >= threshold). Ties go to the smallest
/// threshold.
pub fn max_accuracy_threshold(scores: &[f64], labels: &[Label]) -> Result<(f64, f64)> {
    let highs = labels.iter().filter(|&&l| l == Label::High).count();
    if highs == 0 || highs == labels.len() {
        return Err(EvalError::SingleClassInput);
    }
    Ok(sweep_best_threshold(scores, labels))
}

/// The sweep itself, total over any non-empty input.
fn sweep_best_threshold(scores: &[f64], labels: &[Label]) -> (f64, f64) {
    let n = scores.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    let total_high = labels.iter().filter(|&&l| l == Label::High).count();

    // threshold below every score: everything predicted High
    let mut correct = total_high;
    let mut best_tau = scores[idx[0]] - 1.0;
    let mut best_correct = correct;

    let mut i = 0;
    while i < n {
        let v = scores[idx[i]];
        let mut lows = 0usize;
        let mut highs = 0usize;
        while i < n && scores[idx[i]] == v {
            match labels[idx[i]] {
                Label::Low => lows += 1,
                Label::High => highs += 1,
            }
            i += 1;
        }
        // moving the threshold above v flips this tie group to Low
        correct = correct + lows - highs;
        let tau = if i < n {
            v + (scores[idx[i]] - v) / 2.0
        } else {
            v + 1.0
        };
        if correct > best_correct {
            best_correct = correct;
            best_tau = tau;
        }
    }
    (best_tau, best_correct as f64 / n as f64)
}

fn count_correct_at(scores: &[f64], labels: &[Label], tau: f64) -> usize {
    scores
        .iter()
        .zip(labels)
        .filter(|(&s, &l)| (if s >= tau { Label::High } else { Label::Low }) == l)
        .count()
}

/// ROC curve (FPR, TPR) from a descending threshold sweep with tied
/// scores grouped, plus the trapezoidal AUC. High is the positive class.
pub fn roc(scores: &[f64], labels: &[Label]) -> Result<(Vec<(f64, f64)>, f64)> {
    let pos = labels.iter().filter(|&&l| l == Label::High).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClassInput);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
    let mut points = vec![(0.0, 0.0)];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut auc = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let v = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == v {
            match labels[idx[i]] {
                Label::High => tp += 1,
                Label::Low => fp += 1,
            }
            i += 1;
        }
        let prev = *points.last().unwrap();
        let point = (fp as f64 / neg as f64, tp as f64 / pos as f64);
        auc += (point.0 - prev.0) * (point.1 + prev.1) / 2.0;
        points.push(point);
    }
    Ok((points, auc))
}

/// Optimizer and fusion-model knobs, echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub svm_tol: f64,
    pub svm_max_passes: usize,
    pub mlp_lr: f64,
    pub mlp_epochs: usize,
    pub mlp_dropout: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            svm_tol: 1e-3,
            svm_max_passes: 100_000,
            mlp_lr: 0.05,
            mlp_epochs: 500,
            mlp_dropout: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub fusion: FusionSpec,
    pub labeling: LabelingConfig,
    /// When true (the default) the label thresholds of each fold are
    /// computed from the training users' attention pool only; when false
    /// a single threshold pair over all users is shared by every fold.
    pub strict_leakage: bool,
    pub seed: u64,
    pub train: TrainParams,
}

/// One window ready for training: per-category flat feature vectors for
/// the active feature mode, plus the band attention used for labeling.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFeatures {
    pub user_idx: usize,
    pub start: usize,
    pub band_attention: f64,
    pub feats: BTreeMap<Category, Vec<f64>>,
}

/// Windows and attention pools for a whole evaluation run. `windows`
/// must cover every window that can be labeled under the full pool or
/// any fold's thresholds, sorted by (user_idx, start).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalDataset {
    pub users: Vec<String>,
    /// Sorted per-user attention values (the threshold pools).
    pub pools: Vec<Vec<f64>>,
    pub windows: Vec<WindowFeatures>,
    pub feature_mode: FeatureMode,
    pub window_length: usize,
}

impl EvalDataset {
    /// Thresholds over the pooled attention values of all users except
    /// the excluded one.
    pub fn thresholds_for(
        &self,
        labeling: &LabelingConfig,
        exclude_user: Option<usize>,
    ) -> Result<(f64, f64)> {
        let mut pool = Vec::new();
        for (i, p) in self.pools.iter().enumerate() {
            if Some(i) != exclude_user {
                pool.extend_from_slice(p);
            }
        }
        Ok(compute_label_thresholds(&pool, labeling)?)
    }
}

/// A trained per-category scorer: the SVM plus the min-max normalization
/// fitted on its training-fold raw scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScorer {
    pub model: learn::LinearSvmModel,
    pub norm: ScoreNormalizer,
    pub best_c: f64,
}

impl CategoryScorer {
    pub fn normalized_score(&self, x: &[f64]) -> f64 {
        self.norm.apply(self.model.score(x))
    }
}

/// Everything trained for one fold, serializable for caching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldModels {
    pub held_out_user: String,
    pub tau_low: f64,
    pub tau_high: f64,
    pub svms: BTreeMap<Category, CategoryScorer>,
    pub mlp: Option<MlpFusionModel>,
    /// Selected concatenated-feature indices plus the single fused SVM.
    pub dp: Option<(Vec<usize>, CategoryScorer)>,
}

impl FoldModels {
    /// Fused score of one window under the fold's models.
    pub fn fused_score(&self, spec: &FusionSpec, w: &WindowFeatures) -> Result<f64> {
        match spec.strategy {
            FusionStrategy::Sum => {
                let scores: BTreeMap<Category, f64> = self
                    .svms
                    .iter()
                    .map(|(c, s)| (*c, s.normalized_score(&w.feats[c])))
                    .collect();
                Ok(fuse::score_sum(&scores, &spec.categories)?)
            }
            FusionStrategy::NeuralNet => {
                let mlp = self.mlp.as_ref().expect("neural-net fusion carries its model");
                let scores: Vec<f64> = Category::ALL
                    .iter()
                    .map(|c| self.svms[c].normalized_score(&w.feats[c]))
                    .collect();
                Ok(fuse::nn_fuse(mlp, &scores)?)
            }
            FusionStrategy::DpSelect => {
                let (selected, scorer) = self.dp.as_ref().expect("dp fusion carries its model");
                let concat = concat_feats(w, &spec.categories);
                let reduced: Vec<f64> = selected.iter().map(|&j| concat[j]).collect();
                Ok(scorer.normalized_score(&reduced))
            }
        }
    }
}

fn concat_feats(w: &WindowFeatures, categories: &[Category]) -> Vec<f64> {
    let mut cats = categories.to_vec();
    cats.sort();
    let mut out = Vec::new();
    for c in &cats {
        out.extend_from_slice(&w.feats[c]);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub held_out_user: String,
    pub tau_low: f64,
    pub tau_high: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// Max-accuracy threshold on this fold's held-out scores.
    pub oracle_threshold: f64,
    pub oracle_accuracy: f64,
    /// Threshold picked on the training fold, applied to the held-out user.
    pub heldout_threshold: f64,
    pub heldout_accuracy: f64,
    pub best_c: BTreeMap<Category, f64>,
    /// Ascending indices into the concatenated global feature vector,
    /// present for the feature-selection strategy.
    pub dp_selected: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledMetrics {
    pub n_windows: usize,
    pub oracle_threshold: f64,
    /// Headline number: max-accuracy threshold over the pooled held-out
    /// scores.
    pub oracle_accuracy: f64,
    /// Pooled accuracy under the per-fold training-set thresholds.
    pub heldout_accuracy: f64,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFold {
    pub held_out_user: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub config_hash: String,
    pub seed: u64,
    pub n_users: usize,
    pub window_length: usize,
    pub folds: Vec<FoldReport>,
    pub skipped_folds: Vec<SkippedFold>,
    pub pooled: PooledMetrics,
    pub roc_points: Vec<(f64, f64)>,
    /// Labeled window counts per user (test side of each fold).
    pub window_counts: BTreeMap<String, usize>,
}

struct FoldOutcome {
    report: FoldReport,
    scores: Vec<f64>,
    labels: Vec<Label>,
    heldout_correct: usize,
}

enum FoldRun {
    Done(Box<FoldOutcome>),
    Skipped(SkippedFold),
}

/// Train the models of every fold (no scoring), in fold order.
pub fn train_all_folds(
    dataset: &EvalDataset,
    config: &EvalConfig,
) -> Result<Vec<std::result::Result<FoldModels, SkippedFold>>> {
    config.fusion.validate()?;
    config.labeling.validate()?;
    if dataset.users.len() < 2 {
        return Err(EvalError::InsufficientUsers(dataset.users.len()));
    }
    let full = dataset.thresholds_for(&config.labeling, None)?;
    (0..dataset.users.len())
        .into_par_iter()
        .map(|fold| {
            let thresholds = fold_thresholds(dataset, config, fold, full)?;
            let (train_windows, test_windows) = split_fold(dataset, fold, thresholds);
            if test_windows.is_empty() {
                return Ok(Err(SkippedFold {
                    held_out_user: dataset.users[fold].clone(),
                    reason: "no labeled windows for held-out user".into(),
                }));
            }
            train_fold_models(dataset, config, fold, thresholds, &train_windows).map(Ok)
        })
        .collect()
}

/// Leave-one-user-out evaluation: for each user, train the configured
/// fusion pipeline on everyone else and score the held-out windows.
/// Folds are independent and run in parallel; the report is assembled
/// in user order so the result does not depend on thread count.
pub fn loocv(dataset: &EvalDataset, config: &EvalConfig) -> Result<EvalReport> {
    loocv_impl(dataset, config, None)
}

/// Like `loocv`, but reusing previously trained fold models (keyed by
/// held-out user) instead of training.
pub fn loocv_with_models(
    dataset: &EvalDataset,
    config: &EvalConfig,
    models: &BTreeMap<String, FoldModels>,
) -> Result<EvalReport> {
    loocv_impl(dataset, config, Some(models))
}

fn loocv_impl(
    dataset: &EvalDataset,
    config: &EvalConfig,
    models: Option<&BTreeMap<String, FoldModels>>,
) -> Result<EvalReport> {
    config.fusion.validate()?;
    config.labeling.validate()?;
    if dataset.users.len() < 2 {
        return Err(EvalError::InsufficientUsers(dataset.users.len()));
    }
    let full_thresholds = dataset.thresholds_for(&config.labeling, None)?;

    let runs: Vec<Result<FoldRun>> = (0..dataset.users.len())
        .into_par_iter()
        .map(|fold| run_fold(dataset, config, fold, full_thresholds, models))
        .collect();

    let mut folds = Vec::new();
    let mut skipped = Vec::new();
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    let mut heldout_correct = 0usize;
    let mut window_counts = BTreeMap::new();
    for run in runs {
        match run? {
            FoldRun::Done(outcome) => {
                window_counts.insert(outcome.report.held_out_user.clone(), outcome.report.n_test);
                scores.extend_from_slice(&outcome.scores);
                labels.extend_from_slice(&outcome.labels);
                heldout_correct += outcome.heldout_correct;
                folds.push(outcome.report);
            }
            FoldRun::Skipped(s) => {
                window_counts.insert(s.held_out_user.clone(), 0);
                skipped.push(s);
            }
        }
    }
    if scores.is_empty() {
        return Err(EvalError::SingleClassInput);
    }
    let (pool_tau, pool_acc) = sweep_best_threshold(&scores, &labels);
    let (roc_points, auc) = match roc(&scores, &labels) {
        Ok(v) => v,
        // a pooled single-class outcome is degenerate but reportable
        Err(EvalError::SingleClassInput) => (Vec::new(), 1.0),
        Err(e) => return Err(e),
    };
    let config_hash = fingerprint(serde_json::to_string(config).expect("serializable").as_bytes());
    Ok(EvalReport {
        config: config.clone(),
        config_hash,
        seed: config.seed,
        n_users: dataset.users.len(),
        window_length: dataset.window_length,
        folds,
        skipped_folds: skipped,
        pooled: PooledMetrics {
            n_windows: scores.len(),
            oracle_threshold: pool_tau,
            oracle_accuracy: pool_acc,
            heldout_accuracy: heldout_correct as f64 / scores.len() as f64,
            auc,
        },
        roc_points,
        window_counts,
    })
}

/// Pooled metrics of one category subset under score-sum fusion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetOutcome {
    pub categories: Vec<Category>,
    pub pooled: PooledMetrics,
}

/// Score-sum evaluation of every non-empty subset of the configured
/// categories. The per-category scorers of each fold are trained once
/// and shared across subsets, so this costs little more than a single
/// run.
pub fn loocv_sum_subsets(dataset: &EvalDataset, config: &EvalConfig) -> Result<Vec<SubsetOutcome>> {
    config.fusion.validate()?;
    config.labeling.validate()?;
    if config.fusion.strategy != FusionStrategy::Sum {
        return Err(EvalError::Fusion(fuse::FuseError::InvalidSpec(
            "subset enumeration applies to score-sum fusion".into(),
        )));
    }
    if dataset.users.len() < 2 {
        return Err(EvalError::InsufficientUsers(dataset.users.len()));
    }
    // canonical order so subset means sum in the same order score_sum does
    let cats = {
        let mut c = config.fusion.categories.clone();
        c.sort();
        c
    };
    let cats = &cats;
    let full_thresholds = dataset.thresholds_for(&config.labeling, None)?;

    // per fold: per-category normalized scores for train and test
    struct FoldScores {
        train: BTreeMap<Category, Vec<f64>>,
        test: BTreeMap<Category, Vec<f64>>,
        train_labels: Vec<Label>,
        test_labels: Vec<Label>,
    }
    let folds: Vec<Result<Option<FoldScores>>> = (0..dataset.users.len())
        .into_par_iter()
        .map(|fold| {
            let thresholds = fold_thresholds(dataset, config, fold, full_thresholds)?;
            let (train_windows, test_windows) = split_fold(dataset, fold, thresholds);
            if test_windows.is_empty() {
                return Ok(None);
            }
            let models =
                train_fold_models(dataset, config, fold, thresholds, &train_windows)?;
            let score_cat = |windows: &LabeledWindows<'_>| -> BTreeMap<Category, Vec<f64>> {
                cats.iter()
                    .map(|&c| {
                        let scorer = &models.svms[&c];
                        (c, windows.iter().map(|(w, _)| scorer.normalized_score(&w.feats[&c])).collect())
                    })
                    .collect()
            };
            Ok(Some(FoldScores {
                train: score_cat(&train_windows),
                test: score_cat(&test_windows),
                train_labels: train_windows.iter().map(|(_, l)| *l).collect(),
                test_labels: test_windows.iter().map(|(_, l)| *l).collect(),
            }))
        })
        .collect();
    let folds: Vec<FoldScores> = folds
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    if folds.is_empty() {
        return Err(EvalError::SingleClassInput);
    }

    // all non-empty subsets, smallest first, lexicographic within a size
    let mut subsets: Vec<Vec<Category>> = (1u32..(1 << cats.len()))
        .map(|mask| {
            cats.iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &c)| c)
                .collect()
        })
        .collect();
    subsets.sort_by_key(|s| (s.len(), s.clone()));

    let mut out = Vec::with_capacity(subsets.len());
    for subset in subsets {
        let mut pooled_scores = Vec::new();
        let mut pooled_labels = Vec::new();
        let mut heldout_correct = 0usize;
        for fold in &folds {
            let fuse_scores = |per_cat: &BTreeMap<Category, Vec<f64>>, n: usize| -> Vec<f64> {
                (0..n)
                    .map(|i| subset.iter().map(|c| per_cat[c][i]).sum::<f64>() / subset.len() as f64)
                    .collect()
            };
            let train = fuse_scores(&fold.train, fold.train_labels.len());
            let test = fuse_scores(&fold.test, fold.test_labels.len());
            let (tau, _) = sweep_best_threshold(&train, &fold.train_labels);
            heldout_correct += count_correct_at(&test, &fold.test_labels, tau);
            pooled_scores.extend(test);
            pooled_labels.extend_from_slice(&fold.test_labels);
        }
        let (tau, acc) = sweep_best_threshold(&pooled_scores, &pooled_labels);
        let auc = match roc(&pooled_scores, &pooled_labels) {
            Ok((_, auc)) => auc,
            Err(EvalError::SingleClassInput) => 1.0,
            Err(e) => return Err(e),
        };
        out.push(SubsetOutcome {
            categories: subset,
            pooled: PooledMetrics {
                n_windows: pooled_scores.len(),
                oracle_threshold: tau,
                oracle_accuracy: acc,
                heldout_accuracy: heldout_correct as f64 / pooled_scores.len() as f64,
                auc,
            },
        });
    }
    Ok(out)
}

fn fold_thresholds(
    dataset: &EvalDataset,
    config: &EvalConfig,
    fold: usize,
    full: (f64, f64),
) -> Result<(f64, f64)> {
    if config.strict_leakage {
        dataset.thresholds_for(&config.labeling, Some(fold))
    } else {
        Ok(full)
    }
}

type LabeledWindows<'a> = Vec<(&'a WindowFeatures, Label)>;

fn split_fold(
    dataset: &EvalDataset,
    fold: usize,
    thresholds: (f64, f64),
) -> (LabeledWindows<'_>, LabeledWindows<'_>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for w in &dataset.windows {
        let Some(label) = label_for(w.band_attention, thresholds) else {
            continue;
        };
        if w.user_idx == fold {
            test.push((w, label));
        } else {
            train.push((w, label));
        }
    }
    (train, test)
}

fn run_fold(
    dataset: &EvalDataset,
    config: &EvalConfig,
    fold: usize,
    full_thresholds: (f64, f64),
    prebuilt: Option<&BTreeMap<String, FoldModels>>,
) -> Result<FoldRun> {
    let user = &dataset.users[fold];
    let found = prebuilt.and_then(|map| map.get(user));
    // a prebuilt fold carries the thresholds it was trained under
    let thresholds = match found {
        Some(m) => (m.tau_low, m.tau_high),
        None => fold_thresholds(dataset, config, fold, full_thresholds)?,
    };
    let (train_windows, test_windows) = split_fold(dataset, fold, thresholds);
    if test_windows.is_empty() {
        return Ok(FoldRun::Skipped(SkippedFold {
            held_out_user: user.clone(),
            reason: "no labeled windows for held-out user".into(),
        }));
    }
    let models = match (found, prebuilt) {
        (Some(m), _) => m.clone(),
        (None, Some(_)) => {
            return Err(EvalError::ModelMismatch(format!(
                "no fold models for held-out user {user}"
            )))
        }
        (None, None) => train_fold_models(dataset, config, fold, thresholds, &train_windows)?,
    };

    let train_labels: Vec<Label> = train_windows.iter().map(|(_, l)| *l).collect();
    let test_labels: Vec<Label> = test_windows.iter().map(|(_, l)| *l).collect();
    let score_all = |windows: &LabeledWindows<'_>| -> Result<Vec<f64>> {
        windows
            .iter()
            .map(|(w, _)| models.fused_score(&config.fusion, w))
            .collect()
    };
    let train_fused = score_all(&train_windows)?;
    let test_fused = score_all(&test_windows)?;

    let (held_tau, _) = sweep_best_threshold(&train_fused, &train_labels);
    let heldout_correct = count_correct_at(&test_fused, &test_labels, held_tau);
    let (oracle_tau, oracle_acc) = sweep_best_threshold(&test_fused, &test_labels);

    let best_c: BTreeMap<Category, f64> = match &models.dp {
        Some((_, scorer)) => config
            .fusion
            .categories
            .iter()
            .map(|c| (*c, scorer.best_c))
            .collect(),
        None => models.svms.iter().map(|(c, s)| (*c, s.best_c)).collect(),
    };
    Ok(FoldRun::Done(Box::new(FoldOutcome {
        report: FoldReport {
            held_out_user: user.clone(),
            tau_low: thresholds.0,
            tau_high: thresholds.1,
            n_train: train_windows.len(),
            n_test: test_windows.len(),
            oracle_threshold: oracle_tau,
            oracle_accuracy: oracle_acc,
            heldout_threshold: held_tau,
            heldout_accuracy: heldout_correct as f64 / test_labels.len() as f64,
            best_c,
            dp_selected: models.dp.as_ref().map(|(sel, _)| sel.clone()),
        },
        scores: test_fused,
        labels: test_labels,
        heldout_correct,
    })))
}

fn train_fold_models(
    dataset: &EvalDataset,
    config: &EvalConfig,
    fold: usize,
    thresholds: (f64, f64),
    train_windows: &LabeledWindows<'_>,
) -> Result<FoldModels> {
    let user = &dataset.users[fold];
    let train_labels: Vec<Label> = train_windows.iter().map(|(_, l)| *l).collect();
    let train_groups: Vec<&str> = train_windows
        .iter()
        .map(|(w, _)| dataset.users[w.user_idx].as_str())
        .collect();
    let map_err = |source: learn::LearnError| EvalError::FoldTraining {
        user: user.clone(),
        source,
    };
    let svm_base = |tag: &str| SvmConfig {
        c: 1.0,
        tol: config.train.svm_tol,
        max_passes: config.train.svm_max_passes,
        seed: derive_seed(config.seed, &format!("svm:{user}:{tag}")),
    };

    let mut svms = BTreeMap::new();
    let mut mlp = None;
    let mut dp = None;
    match config.fusion.strategy {
        FusionStrategy::Sum | FusionStrategy::NeuralNet => {
            for &cat in &config.fusion.categories {
                let x_train = gather(train_windows, cat);
                let outcome = grid_search_c(
                    &x_train,
                    &train_labels,
                    &train_groups,
                    &default_c_grid(),
                    &svm_base(cat.name()),
                    derive_seed(config.seed, &format!("split:{user}:{cat}")),
                )
                .map_err(map_err)?;
                let raw_train: Vec<f64> = train_windows
                    .iter()
                    .map(|(w, _)| outcome.model.score(&w.feats[&cat]))
                    .collect();
                svms.insert(
                    cat,
                    CategoryScorer {
                        norm: ScoreNormalizer::fit(&raw_train),
                        best_c: outcome.best_c,
                        model: outcome.model,
                    },
                );
            }
            if config.fusion.strategy == FusionStrategy::NeuralNet {
                let mut s_train = Mat::with_cols(Category::ALL.len());
                let mut row = vec![0.0; Category::ALL.len()];
                for (w, _) in train_windows {
                    for (k, cat) in Category::ALL.iter().enumerate() {
                        row[k] = svms[cat].normalized_score(&w.feats[cat]);
                    }
                    s_train.push_row(&row);
                }
                mlp = Some(
                    train_mlp(
                        &s_train,
                        &train_labels,
                        &MlpHyper {
                            lr: config.train.mlp_lr,
                            epochs: config.train.mlp_epochs,
                            dropout_rate: config.train.mlp_dropout,
                            seed: derive_seed(config.seed, &format!("mlp:{user}")),
                        },
                    )
                    .map_err(map_err)?,
                );
            }
        }
        FusionStrategy::DpSelect => {
            let x_train = gather_concat(train_windows, &config.fusion.categories);
            let (stats, reduced) = dp_select(&x_train, &train_labels, config.fusion.dp_fraction)?;
            let outcome = grid_search_c(
                &reduced,
                &train_labels,
                &train_groups,
                &default_c_grid(),
                &svm_base("dp"),
                derive_seed(config.seed, &format!("split:{user}:dp")),
            )
            .map_err(map_err)?;
            let raw_train: Vec<f64> = reduced.iter_rows().map(|r| outcome.model.score(r)).collect();
            dp = Some((
                stats.selected,
                CategoryScorer {
                    norm: ScoreNormalizer::fit(&raw_train),
                    best_c: outcome.best_c,
                    model: outcome.model,
                },
            ));
        }
    }
    Ok(FoldModels {
        held_out_user: user.clone(),
        tau_low: thresholds.0,
        tau_high: thresholds.1,
        svms,
        mlp,
        dp,
    })
}

fn gather(windows: &[(&WindowFeatures, Label)], cat: Category) -> Mat {
    let cols = windows.first().map_or(0, |(w, _)| w.feats[&cat].len());
    let mut m = Mat::with_cols(cols);
    for (w, _) in windows {
        m.push_row(&w.feats[&cat]);
    }
    m
}

fn gather_concat(windows: &[(&WindowFeatures, Label)], categories: &[Category]) -> Mat {
    let cols: usize = windows
        .first()
        .map_or(0, |(w, _)| concat_feats(w, categories).len());
    let mut m = Mat::with_cols(cols);
    for (w, _) in windows {
        m.push_row(&concat_feats(w, categories));
    }
    m
}
