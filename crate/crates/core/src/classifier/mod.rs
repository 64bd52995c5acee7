//! Per-frame classification backends.
//!
//! A backend turns a frame into a 5-class probability vector plus the
//! 1280-dim penultimate embedding from the same forward pass. Two backends
//! exist: an ONNX model runner for real exported classifiers, and a cheap
//! deterministic synthetic backend for tests and fixtures.

mod onnx;
mod synthetic;

pub use synthetic::synthetic_classifier;

use crate::transforms::resize_bilinear;
use crate::types::{FeatureVector, Frame, ProbVector, FEATURE_DIM, NUM_CLASSES};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("model file not found: {0}")]
    FileNotFound(String),
    #[error("unsupported model format: {0}")]
    UnsupportedFormat(String),
    #[error("model shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("inference failure: {0}")]
    InferenceFailure(String),
}

/// Classifier response for one frame: probabilities and features from the
/// same forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierOutput {
    pub probs: ProbVector,
    pub features: FeatureVector,
}

/// A loaded classification backend. Both implementations are immutable after
/// construction, so a handle can be shared read-only across workers and
/// `classify` called concurrently.
pub(crate) trait Backend: Send + Sync {
    /// (width, height) the backend expects.
    fn input_size(&self) -> (usize, usize);
    /// Raw class outputs (length 5, possibly logits) and features (length 1280)
    /// for a frame already resized to `input_size`.
    fn run(&self, frame: &Frame) -> Result<(Vec<f64>, Vec<f64>), ClassifierError>;
}

/// Opaque reference to a loaded model.
#[derive(Clone)]
pub struct ModelHandle {
    backend: Arc<dyn Backend>,
    saw_logits: Arc<AtomicBool>,
}

impl ModelHandle {
    pub(crate) fn from_backend(backend: Arc<dyn Backend>) -> ModelHandle {
        ModelHandle {
            backend,
            saw_logits: Arc::new(AtomicBool::new(false)),
        }
    }

    pub fn input_width(&self) -> usize {
        self.backend.input_size().0
    }

    pub fn input_height(&self) -> usize {
        self.backend.input_size().1
    }

    /// Number of classes in the probability output.
    pub fn num_classes(&self) -> usize {
        NUM_CLASSES
    }

    /// Feature (penultimate embedding) dimensionality.
    pub fn feature_dim(&self) -> usize {
        FEATURE_DIM
    }

    /// True once any classify call received non-normalized class outputs and
    /// fell back to applying softmax.
    pub fn softmax_fallback_used(&self) -> bool {
        self.saw_logits.load(Ordering::Relaxed)
    }
}

impl std::fmt::Debug for ModelHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (w, h) = self.backend.input_size();
        f.debug_struct("ModelHandle")
            .field("input", &format!("{w}x{h}"))
            .finish()
    }
}

/// Load an ONNX model from disk and validate its graph contract: one image
/// input and two outputs of width 5 (probs or logits) and 1280 (features).
pub fn load_model(path: &Path) -> Result<ModelHandle, ClassifierError> {
    let backend = onnx::OnnxBackend::load(path)?;
    Ok(ModelHandle::from_backend(Arc::new(backend)))
}

/// Run one frame through the backend. The frame is resized internally to the
/// model's declared input size; class outputs that do not sum to ~1 are
/// treated as logits and passed through softmax.
pub fn classify(handle: &ModelHandle, frame: &Frame) -> Result<ClassifierOutput, ClassifierError> {
    let (w, h) = handle.backend.input_size();
    let resized = resize_bilinear(frame, w, h);
    let (raw, features) = handle.backend.run(&resized)?;
    if raw.len() != NUM_CLASSES {
        return Err(ClassifierError::ShapeMismatch(format!(
            "backend returned {} class outputs, expected {NUM_CLASSES}",
            raw.len()
        )));
    }

    let sum: f64 = raw.iter().sum();
    let probs = if (0.99..=1.01).contains(&sum) && raw.iter().all(|&x| x >= 0.0) {
        normalize(&raw)
    } else {
        handle.saw_logits.store(true, Ordering::Relaxed);
        softmax(&raw)
    };
    let probs = ProbVector::new(probs)
        .map_err(|e| ClassifierError::InferenceFailure(format!("bad probability output: {e}")))?;
    let features = FeatureVector::new(features)
        .map_err(|e| ClassifierError::InferenceFailure(format!("bad feature output: {e}")))?;
    Ok(ClassifierOutput { probs, features })
}

fn normalize(raw: &[f64]) -> [f64; NUM_CLASSES] {
    let sum: f64 = raw.iter().sum();
    let mut out = [0.0; NUM_CLASSES];
    for (o, &x) in out.iter_mut().zip(raw) {
        *o = (x / sum).clamp(0.0, 1.0);
    }
    out
}

fn softmax(raw: &[f64]) -> [f64; NUM_CLASSES] {
    let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = raw.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let mut out = [0.0; NUM_CLASSES];
    for (o, e) in out.iter_mut().zip(&exps) {
        *o = e / sum;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame_of(value: f32, w: usize, h: usize) -> Frame {
        Frame::new(vec![value; w * h], w, h).unwrap()
    }

    #[test]
    fn synthetic_outputs_are_deterministic() {
        let handle = synthetic_classifier(0);
        let f = frame_of(0.3, 40, 40);
        let a = classify(&handle, &f).unwrap();
        let b = classify(&handle, &f).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn synthetic_seeds_differ() {
        let a = synthetic_classifier(0);
        let b = synthetic_classifier(1);
        let f = frame_of(0.3, 40, 40);
        let out_a = classify(&a, &f).unwrap();
        let out_b = classify(&b, &f).unwrap();
        assert_ne!(out_a.probs, out_b.probs);
    }

    #[test]
    fn synthetic_feature_length_is_1280() {
        let handle = synthetic_classifier(3);
        let f = frame_of(0.5, 17, 23);
        let out = classify(&handle, &f).unwrap();
        assert_eq!(out.features.values().len(), FEATURE_DIM);
    }

    #[test]
    fn probs_sum_to_one() {
        let handle = synthetic_classifier(5);
        let f = frame_of(0.8, 30, 20);
        let out = classify(&handle, &f).unwrap();
        let sum: f64 = out.probs.values().iter().sum();
        assert!((sum - 1.0).abs() < 1e-5);
    }

    #[test]
    fn missing_model_file_is_reported() {
        let err = load_model(Path::new("/nonexistent/model.onnx")).unwrap_err();
        assert!(matches!(err, ClassifierError::FileNotFound(_)));
    }

    #[test]
    fn softmax_handles_logits() {
        let out = softmax(&[2.0, 1.0, 0.0, -1.0, -2.0]);
        let sum: f64 = out.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(out[0] > out[1] && out[1] > out[2]);
    }
}
