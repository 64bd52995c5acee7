//! Training-pair persistence.
//!
//! Plain text, one block per video:
//!
//! ```text
//! pairs v1
//! video <id> <frames> <feature_dim>
//! f <feature_dim floats>        (one line per frame)
//! ...
//! t <frames floats>             (one target per frame)
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! save/load cycle reproduces every value bit for bit.

use super::PipelineError;
use crate::types::{FeatureVector, QualityScore};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

const HEADER: &str = "pairs v1";

/// One video's worth of recurrent-head training data: identity-pass
/// features and the metric's quality value per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub video_id: String,
    pub features: Vec<FeatureVector>,
    pub targets: Vec<QualityScore>,
}

pub fn save_pairs(pairs: &[TrainingPair], path: &Path) -> Result<(), PipelineError> {
    let mut text = String::new();
    writeln!(text, "{HEADER}").unwrap();
    for pair in pairs {
        if pair.video_id.is_empty() || pair.video_id.chars().any(char::is_whitespace) {
            return Err(PipelineError::BadRecords(format!(
                "video id {:?} must be non-empty and free of whitespace",
                pair.video_id
            )));
        }
        if pair.features.len() != pair.targets.len() {
            return Err(PipelineError::BadRecords(format!(
                "video {}: {} feature rows but {} targets",
                pair.video_id,
                pair.features.len(),
                pair.targets.len()
            )));
        }
        if pair.features.is_empty() {
            return Err(PipelineError::BadRecords(format!(
                "video {} has no frames",
                pair.video_id
            )));
        }
        let dim = pair.features[0].values().len();
        writeln!(
            text,
            "video {} {} {dim}",
            pair.video_id,
            pair.features.len()
        )
        .unwrap();
        for feature in &pair.features {
            text.push('f');
            for v in feature.values() {
                write!(text, " {v}").unwrap();
            }
            text.push('\n');
        }
        text.push('t');
        for target in &pair.targets {
            write!(text, " {}", target.value()).unwrap();
        }
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn load_pairs(path: &Path) -> Result<Vec<TrainingPair>, PipelineError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let bad = |lineno: usize, msg: String| {
        PipelineError::BadRecords(format!("{}:{}: {msg}", path.display(), lineno + 1))
    };

    match lines.next() {
        Some((_, line)) if line == HEADER => {}
        Some((n, line)) => return Err(bad(n, format!("bad header {line:?}"))),
        None => return Err(bad(0, "empty file".into())),
    }

    let mut pairs = Vec::new();
    while let Some((n, line)) = lines.next() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        if parts.next() != Some("video") {
            return Err(bad(n, format!("expected a video line, got {line:?}")));
        }
        let video_id = parts
            .next()
            .ok_or_else(|| bad(n, "video line missing id".into()))?
            .to_string();
        let frames: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(n, "video line missing frame count".into()))?;
        let dim: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(n, "video line missing feature dim".into()))?;
        if frames == 0 {
            return Err(bad(n, format!("video {video_id} has no frames")));
        }

        let mut features = Vec::with_capacity(frames);
        for _ in 0..frames {
            let (n, line) = lines
                .next()
                .ok_or_else(|| bad(n, format!("video {video_id}: truncated feature block")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some("f") {
                return Err(bad(n, format!("expected a feature line, got {line:?}")));
            }
            let values: Vec<f64> = parts
                .map(|s| s.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| bad(n, format!("bad float: {e}")))?;
            if values.len() != dim {
                return Err(bad(
                    n,
                    format!("feature line has {} values, expected {dim}", values.len()),
                ));
            }
            features.push(FeatureVector::with_dim(values, dim).map_err(|e| bad(n, e.to_string()))?);
        }

        let (tn, line) = lines
            .next()
            .ok_or_else(|| bad(n, format!("video {video_id}: missing target line")))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some("t") {
            return Err(bad(tn, format!("expected a target line, got {line:?}")));
        }
        let targets: Vec<QualityScore> = parts
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| bad(tn, format!("bad float: {e}")))
                    .and_then(|v| QualityScore::new(v).map_err(|e| bad(tn, e.to_string())))
            })
            .collect::<Result<_, _>>()?;
        if targets.len() != frames {
            return Err(bad(
                tn,
                format!(
                    "target line has {} values, expected {frames}",
                    targets.len()
                ),
            ));
        }
        pairs.push(TrainingPair {
            video_id,
            features,
            targets,
        });
    }
    Ok(pairs)
}
