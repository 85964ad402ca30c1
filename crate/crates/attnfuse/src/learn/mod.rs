//! From-scratch trainers: per-category linear SVMs and the score-fusion
//! multilayer perceptron.

pub mod mlp;
pub mod svm;

use thiserror::Error;

pub use mlp::{loss_and_gradient, train_mlp, MlpFusionModel, MlpHyper, MLP_INPUTS, MLP_PARAM_COUNT};
pub use svm::{
    default_c_grid, grid_search_c, train_linear_svm, train_linear_svm_traced, GridSearchOutcome,
    LinearSvmModel, ScoreNormalizer, SvmConfig, TrainTrace,
};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("training data contains a single class")]
    SingleClassInput,
    #[error("non-finite feature value in training data")]
    NonFiniteFeature,
    #[error("training loss diverged (non-finite)")]
    DivergedLoss,
    #[error("wrong input arity: expected {expected}, got {got}")]
    WrongArity { expected: usize, got: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, LearnError>;
