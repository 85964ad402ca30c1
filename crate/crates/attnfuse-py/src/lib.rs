//! Python bindings for the core feature, training, fusion, and
//! evaluation operations. Build with `cargo build -p attnfuse-py
//! --release`, then import the produced shared library as
//! `attnfuse_py` (see python/smoke_test.py).

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use attnfuse::derive;
use attnfuse::eval;
use attnfuse::fuse;
use attnfuse::globalfeat;
use attnfuse::learn;
use attnfuse::mat::Mat;
use attnfuse::types::{Category, Label, Point2};
use attnfuse::window;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn to_labels(labels: &[bool]) -> Vec<Label> {
    labels
        .iter()
        .map(|&b| if b { Label::High } else { Label::Low })
        .collect()
}

fn to_mat(rows: Vec<Vec<f64>>) -> PyResult<Mat> {
    if rows.is_empty() {
        return Err(value_err("empty matrix"));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(value_err("ragged rows"));
    }
    Ok(Mat::from_rows(&rows))
}

/// Eye aspect ratio of six (x, y) eye landmarks.
#[pyfunction]
fn compute_ear(eye: Vec<(f64, f64)>) -> PyResult<f64> {
    let points: [Point2; 6] = eye
        .iter()
        .map(|&(x, y)| Point2::new(x, y))
        .collect::<Vec<_>>()
        .try_into()
        .map_err(|_| value_err("expected exactly 6 eye points"))?;
    derive::compute_ear(&points).map_err(value_err)
}

/// Z-score normalization; stats default to the series' own moments.
/// Returns (values, zero_variance_flag).
#[pyfunction]
#[pyo3(signature = (series, mean=None, std=None))]
fn zscore_normalize(
    series: Vec<f64>,
    mean: Option<f64>,
    std: Option<f64>,
) -> PyResult<(Vec<f64>, bool)> {
    let stats = match (mean, std) {
        (Some(m), Some(s)) => Some((m, s)),
        (None, None) => None,
        _ => return Err(value_err("pass both mean and std, or neither")),
    };
    let n = derive::zscore_normalize(&series, stats).map_err(value_err)?;
    Ok((n.values, n.zero_variance))
}

/// Low/high label thresholds as percentiles of the pooled attention
/// values (linear interpolation between order statistics).
#[pyfunction]
#[pyo3(signature = (pool, low_percentile=10.0, high_percentile=90.0))]
fn label_thresholds(
    pool: Vec<f64>,
    low_percentile: f64,
    high_percentile: f64,
) -> PyResult<(f64, f64)> {
    let cfg = window::LabelingConfig {
        low_percentile,
        high_percentile,
        ..Default::default()
    };
    window::compute_label_thresholds(&pool, &cfg).map_err(value_err)
}

/// The 28 statistical descriptors of one channel (needs length >= 4).
#[pyfunction]
fn global_features(x: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(globalfeat::global_features(&x).map_err(value_err)?.to_vec())
}

/// Forward-difference derivative chain: (v, a, a_t, a_c, j).
#[pyfunction]
#[allow(clippy::type_complexity)]
fn kinematics(x: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let k = globalfeat::kinematics(&x).map_err(value_err)?;
    Ok((k.v, k.a, k.a_t, k.a_c, k.j))
}

/// Decision threshold maximizing accuracy; labels are True for High.
/// Returns (threshold, accuracy).
#[pyfunction]
fn max_accuracy_threshold(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<(f64, f64)> {
    eval::max_accuracy_threshold(&scores, &to_labels(&labels)).map_err(value_err)
}

/// ROC points as (fpr, tpr) pairs plus the trapezoidal AUC.
#[pyfunction]
fn roc_curve(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<(Vec<(f64, f64)>, f64)> {
    eval::roc(&scores, &to_labels(&labels)).map_err(value_err)
}

/// Indices of the top-discrimination-power features (ascending).
#[pyfunction]
#[pyo3(signature = (rows, labels, fraction=0.10))]
fn dp_select(rows: Vec<Vec<f64>>, labels: Vec<bool>, fraction: f64) -> PyResult<Vec<usize>> {
    let x = to_mat(rows)?;
    let (stats, _) = fuse::dp_select(&x, &to_labels(&labels), fraction).map_err(value_err)?;
    Ok(stats.selected)
}

/// Mean of normalized category scores; scores keyed by category name.
#[pyfunction]
fn score_sum(
    scores: std::collections::BTreeMap<String, f64>,
    categories: Vec<String>,
) -> PyResult<f64> {
    let mut map = std::collections::BTreeMap::new();
    for (name, v) in scores {
        map.insert(name.parse::<Category>().map_err(value_err)?, v);
    }
    let cats: Vec<Category> = categories
        .iter()
        .map(|c| c.parse::<Category>().map_err(value_err))
        .collect::<PyResult<_>>()?;
    fuse::score_sum(&map, &cats).map_err(value_err)
}

/// Linear SVM trained by dual coordinate descent on standardized
/// features (High is the positive class).
#[pyclass]
struct LinearSvm {
    model: learn::LinearSvmModel,
}

#[pymethods]
impl LinearSvm {
    #[staticmethod]
    #[pyo3(signature = (rows, labels, c=1.0, tol=1e-3, max_passes=100_000, seed=0))]
    fn train(
        rows: Vec<Vec<f64>>,
        labels: Vec<bool>,
        c: f64,
        tol: f64,
        max_passes: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let x = to_mat(rows)?;
        let cfg = learn::SvmConfig { c, tol, max_passes, seed };
        let model = learn::train_linear_svm(&x, &to_labels(&labels), &cfg).map_err(runtime_err)?;
        Ok(LinearSvm { model })
    }

    /// Grid search over the power-of-ten C grid with a user-grouped
    /// inner split; returns (model, best_c).
    #[staticmethod]
    #[pyo3(signature = (rows, labels, groups, seed=0))]
    fn train_grid(
        rows: Vec<Vec<f64>>,
        labels: Vec<bool>,
        groups: Vec<String>,
        seed: u64,
    ) -> PyResult<(Self, f64)> {
        let x = to_mat(rows)?;
        let group_refs: Vec<&str> = groups.iter().map(String::as_str).collect();
        let out = learn::grid_search_c(
            &x,
            &to_labels(&labels),
            &group_refs,
            &learn::default_c_grid(),
            &learn::SvmConfig { seed, ..Default::default() },
            seed,
        )
        .map_err(runtime_err)?;
        Ok((LinearSvm { model: out.model }, out.best_c))
    }

    /// Raw signed margin.
    fn score(&self, x: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.model.w.len() {
            return Err(value_err(format!(
                "expected {} features, got {}",
                self.model.w.len(),
                x.len()
            )));
        }
        Ok(self.model.score(&x))
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<bool> {
        Ok(self.score(x)? >= 0.0)
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.model.w.clone()
    }

    #[getter]
    fn bias(&self) -> f64 {
        self.model.b
    }

    #[getter]
    fn c(&self) -> f64 {
        self.model.c
    }

    #[getter]
    fn converged(&self) -> bool {
        self.model.converged
    }
}

/// The 7-16-8-1 score-fusion network (ReLU hidden layers, sigmoid
/// output, inverted dropout during training).
#[pyclass]
struct ScoreFusionMlp {
    model: learn::MlpFusionModel,
}

#[pymethods]
impl ScoreFusionMlp {
    #[staticmethod]
    #[pyo3(signature = (rows, labels, lr=0.05, epochs=500, dropout=0.5, seed=0))]
    fn train(
        rows: Vec<Vec<f64>>,
        labels: Vec<bool>,
        lr: f64,
        epochs: usize,
        dropout: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let x = to_mat(rows)?;
        let hyper = learn::MlpHyper {
            lr,
            epochs,
            dropout_rate: dropout,
            seed,
        };
        let model = learn::train_mlp(&x, &to_labels(&labels), &hyper).map_err(runtime_err)?;
        Ok(ScoreFusionMlp { model })
    }

    /// Deterministic inference-mode fused score in (0, 1); expects the
    /// 7 category scores in canonical order (EB, EAR, HS, NS, HP, Exp, H).
    fn forward(&self, scores: Vec<f64>) -> PyResult<f64> {
        fuse::nn_fuse(&self.model, &scores).map_err(value_err)
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.model.param_count()
    }
}

#[pymodule]
fn attnfuse_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(compute_ear, m)?)?;
    m.add_function(wrap_pyfunction!(zscore_normalize, m)?)?;
    m.add_function(wrap_pyfunction!(label_thresholds, m)?)?;
    m.add_function(wrap_pyfunction!(global_features, m)?)?;
    m.add_function(wrap_pyfunction!(kinematics, m)?)?;
    m.add_function(wrap_pyfunction!(max_accuracy_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(roc_curve, m)?)?;
    m.add_function(wrap_pyfunction!(dp_select, m)?)?;
    m.add_function(wrap_pyfunction!(score_sum, m)?)?;
    m.add_class::<LinearSvm>()?;
    m.add_class::<ScoreFusionMlp>()?;
    m.add("CATEGORIES", vec!["EB", "EAR", "HS", "NS", "HP", "Exp", "H"])?;
    m.add("GLOBAL_FEATURE_COUNT", globalfeat::GLOBAL_FEATURES)?;
    Ok(())
}
