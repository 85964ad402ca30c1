//! Attention classification from per-frame facial feature streams.
//!
//! The pipeline turns timestamped feature records (eyeblink, eye aspect
//! ratio, head/nose size, head pose, expression embedding, heart rate)
//! into labeled sliding windows, trains one linear SVM per feature
//! category, fuses the category scores (score sum, small neural network,
//! or discrimination-power feature selection), and evaluates high/low
//! attention classification under leave-one-user-out cross-validation.

pub mod config;
pub mod derive;
pub mod eval;
pub mod fuse;
pub mod globalfeat;
pub mod ingest;
pub mod learn;
pub mod mat;
pub mod pipeline;
pub mod synth;
pub mod types;
pub mod util;
pub mod window;

pub use ingest::{AttentionSeries, FrameFeatureRecord, FrameFeatureStream, LandmarkFrame};
pub use mat::Mat;
pub use types::{Category, Label, Point2};
pub use window::{LabelingConfig, WindowSample};
