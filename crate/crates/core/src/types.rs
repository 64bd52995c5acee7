//! Shared domain types used across the whole crate.
//!
//! All types here are immutable after construction and safe to share
//! read-only across threads.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of classifier classes.
pub const NUM_CLASSES: usize = 5;

/// Dimensionality of the classifier's penultimate-layer embedding.
pub const FEATURE_DIM: usize = 1280;

/// Slack allowed on the sum of a probability vector at construction.
pub const PROB_SUM_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum TypeError {
    #[error("probability vector invalid: {0}")]
    InvalidProbVector(String),
    #[error("raw vector invalid: {0}")]
    InvalidRawVector(String),
    #[error("feature vector invalid: {0}")]
    InvalidFeatureVector(String),
    #[error("frame invalid: {0}")]
    InvalidFrame(String),
    #[error("quality score invalid: {0}")]
    InvalidQualityScore(String),
}

/// The five classes the frame classifier distinguishes: the three standard
/// fetal-brain planes, other brain sections, and everything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    TransVentricular = 0,
    TransThalamic = 1,
    TransCerebellar = 2,
    BrainOther = 3,
    NotABrain = 4,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; NUM_CLASSES] = [
        ClassLabel::TransVentricular,
        ClassLabel::TransThalamic,
        ClassLabel::TransCerebellar,
        ClassLabel::BrainOther,
        ClassLabel::NotABrain,
    ];

    /// Stable integer code, 0..4.
    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<ClassLabel> {
        Self::ALL.get(code).copied()
    }

    /// True for the four classes that show some part of the brain.
    pub fn is_brain(self) -> bool {
        self != ClassLabel::NotABrain
    }

    /// Canonical snake_case name, as used in manifest files.
    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::TransVentricular => "trans_ventricular",
            ClassLabel::TransThalamic => "trans_thalamic",
            ClassLabel::TransCerebellar => "trans_cerebellar",
            ClassLabel::BrainOther => "brain_other",
            ClassLabel::NotABrain => "not_a_brain",
        }
    }

    pub fn parse(s: &str) -> Option<ClassLabel> {
        Self::ALL.iter().copied().find(|c| c.name() == s)
    }
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A proper probability distribution over the five classes: nonnegative
/// entries summing to 1 (within [`PROB_SUM_TOL`]).
///
/// Hardened or averaged vectors, whose entries may sum to less than 1,
/// are [`RawVector`]s instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbVector {
    p: [f64; NUM_CLASSES],
}

impl ProbVector {
    pub fn new(p: [f64; NUM_CLASSES]) -> Result<ProbVector, TypeError> {
        for (k, &v) in p.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(TypeError::InvalidProbVector(format!(
                    "entry {k} out of range: {v}"
                )));
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(TypeError::InvalidProbVector(format!(
                "entries sum to {sum}, expected 1"
            )));
        }
        Ok(ProbVector { p })
    }

    pub fn values(&self) -> &[f64; NUM_CLASSES] {
        &self.p
    }

    pub fn get(&self, label: ClassLabel) -> f64 {
        self.p[label.code()]
    }
}

/// A sub-stochastic class vector: nonnegative entries whose sum may be
/// anywhere in [0, 1]. Produced by hardening and by averaging over
/// transforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawVector {
    v: [f64; NUM_CLASSES],
}

impl RawVector {
    pub fn new(v: [f64; NUM_CLASSES]) -> Result<RawVector, TypeError> {
        for (k, &x) in v.iter().enumerate() {
            if !x.is_finite() || x < 0.0 {
                return Err(TypeError::InvalidRawVector(format!(
                    "entry {k} negative or non-finite: {x}"
                )));
            }
        }
        let sum: f64 = v.iter().sum();
        if sum > 1.0 + PROB_SUM_TOL {
            return Err(TypeError::InvalidRawVector(format!(
                "entries sum to {sum} > 1"
            )));
        }
        Ok(RawVector { v })
    }

    pub fn zero() -> RawVector {
        RawVector {
            v: [0.0; NUM_CLASSES],
        }
    }

    pub fn values(&self) -> &[f64; NUM_CLASSES] {
        &self.v
    }

    pub fn is_zero(&self) -> bool {
        self.v.iter().all(|&x| x == 0.0)
    }
}

/// The classifier's 1280-dim penultimate-layer embedding for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    f: Vec<f64>,
}

impl FeatureVector {
    pub fn new(f: Vec<f64>) -> Result<FeatureVector, TypeError> {
        FeatureVector::with_dim(f, FEATURE_DIM)
    }

    /// Like [`FeatureVector::new`] but for an arbitrary embedding width,
    /// used with reduced-size recurrent heads in experiments and tests.
    pub fn with_dim(f: Vec<f64>, dim: usize) -> Result<FeatureVector, TypeError> {
        if f.len() != dim {
            return Err(TypeError::InvalidFeatureVector(format!(
                "length {} != {dim}",
                f.len()
            )));
        }
        if let Some(bad) = f.iter().find(|x| !x.is_finite()) {
            return Err(TypeError::InvalidFeatureVector(format!(
                "non-finite entry {bad}"
            )));
        }
        Ok(FeatureVector { f })
    }

    pub fn values(&self) -> &[f64] {
        &self.f
    }
}

/// A single grayscale video frame with intensities in [0, 1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pixels: Vec<f32>,
    width: usize,
    height: usize,
}

impl Frame {
    pub fn new(pixels: Vec<f32>, width: usize, height: usize) -> Result<Frame, TypeError> {
        if width == 0 || height == 0 {
            return Err(TypeError::InvalidFrame(format!(
                "dimensions {width}x{height} must be at least 1x1"
            )));
        }
        if pixels.len() != width * height {
            return Err(TypeError::InvalidFrame(format!(
                "pixel count {} != {width}x{height}",
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(TypeError::InvalidFrame(format!(
                "pixel value {bad} outside [0, 1]"
            )));
        }
        Ok(Frame {
            pixels,
            width,
            height,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.pixels[y * self.width + x]
    }
}

/// A frame quality value in [0, 1]; higher means a better keyframe candidate.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QualityScore(f64);

impl QualityScore {
    pub fn new(q: f64) -> Result<QualityScore, TypeError> {
        if !q.is_finite() || !(0.0..=1.0).contains(&q) {
            return Err(TypeError::InvalidQualityScore(format!(
                "value {q} outside [0, 1]"
            )));
        }
        Ok(QualityScore(q))
    }

    pub const ZERO: QualityScore = QualityScore(0.0);

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Label of the maximal entry; ties break toward the lowest class code so
/// results are reproducible.
pub fn argmax_class(p: &ProbVector) -> ClassLabel {
    argmax_slice(p.values())
}

pub(crate) fn argmax_slice(v: &[f64; NUM_CLASSES]) -> ClassLabel {
    let mut best = 0;
    for k in 1..NUM_CLASSES {
        if v[k] > v[best] {
            best = k;
        }
    }
    ClassLabel::from_code(best).unwrap()
}
