//! Keyframe detection for fetal-brain ultrasound video.
//!
//! The library classifies each frame into five anatomical-plane classes,
//! scores frame quality by combining class stability over time with
//! test-time augmentation, trains a small GRU head to predict that quality
//! directly from classifier embeddings, and selects keyframes from the
//! resulting quality series.
//!
//! Modules:
//!
//! - [`types`]: core domain types (class labels, probability vectors,
//!   frames, quality scores).
//! - [`transforms`]: affine image transforms and the test-time
//!   augmentation catalogue.
//! - [`classifier`]: frame classification backends (ONNX models and a
//!   deterministic synthetic stand-in).
//! - [`quality`]: the stability-filtered, augmentation-averaged frame
//!   quality metric.
//! - [`gru`]: the recurrent quality-prediction head with from-scratch
//!   training.
//! - [`dataset`]: image manifests, patient-disjoint splitting, per-epoch
//!   undersampling and corpus statistics.
//! - [`pipeline`]: end-to-end orchestration and file formats.

pub mod classifier;
pub mod dataset;
pub mod gru;
pub mod pipeline;
pub mod quality;
pub mod transforms;
pub mod types;

pub use types::{
    ClassLabel, FeatureVector, Frame, ProbVector, QualityScore, FEATURE_DIM, NUM_CLASSES,
};
