//! Keyframe selection from a quality series.
//!
//! Candidates are strict local maxima (a plateau of equal values counts
//! once, at its first index; sequence boundaries count as minus infinity).
//! Candidates below `min_quality` are dropped, then greedy non-maximum
//! suppression keeps the best candidate within each `nms_radius`
//! neighborhood, and finally at most `top_k` survivors are reported in
//! frame order.

use super::PipelineError;
use crate::quality::QualitySeries;
use crate::types::ClassLabel;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectParams {
    /// Candidates with quality strictly below this are discarded.
    pub min_quality: f64,
    /// Two selected keyframes must be more than this many frames apart.
    pub nms_radius: usize,
    /// Keep at most this many keyframes; must be at least 1.
    pub top_k: usize,
}

impl Default for SelectParams {
    fn default() -> SelectParams {
        SelectParams {
            min_quality: 0.0,
            nms_radius: 0,
            top_k: 10,
        }
    }
}

/// Which scorer produced the quality series a keyframe was picked from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionSource {
    Metric,
    Gru,
}

/// One selected frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub frame_index: usize,
    pub quality: f64,
    pub selected_class: ClassLabel,
    pub source: SelectionSource,
}

/// Selection outcome, serializable as the JSON report the CLI emits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyframeReport {
    pub version: String,
    pub frame_count: usize,
    pub params: SelectParams,
    pub timing_ms: f64,
    pub keyframes: Vec<Keyframe>,
}

pub fn select_keyframes(
    series: &QualitySeries,
    params: &SelectParams,
    source: SelectionSource,
) -> Result<KeyframeReport, PipelineError> {
    let started = std::time::Instant::now();
    if series.is_empty() {
        return Err(PipelineError::EmptySeries);
    }
    if !(0.0..=1.0).contains(&params.min_quality) {
        return Err(PipelineError::BadRecords(format!(
            "min_quality {} outside [0, 1]",
            params.min_quality
        )));
    }
    if params.top_k == 0 {
        return Err(PipelineError::BadRecords("top_k must be at least 1".into()));
    }
    let q = series.qualities();
    let n = q.len();

    // Plateau runs of equal quality; a run is a candidate when it is
    // strictly above both neighbors (or the boundary).
    let mut candidates: Vec<usize> = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && q[end + 1] == q[start] {
            end += 1;
        }
        let above_left = start == 0 || q[start] > q[start - 1];
        let above_right = end == n - 1 || q[start] > q[end + 1];
        if above_left && above_right && q[start] >= params.min_quality {
            candidates.push(start);
        }
        start = end + 1;
    }

    // Greedy suppression: best quality first, ties to the earlier frame.
    candidates.sort_by(|&a, &b| {
        q[b].partial_cmp(&q[a])
            .expect("quality values are finite")
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = Vec::new();
    for &c in &candidates {
        if kept.iter().all(|&k| c.abs_diff(k) > params.nms_radius) {
            kept.push(c);
        }
    }
    kept.truncate(params.top_k);
    kept.sort_unstable();

    let keyframes = kept
        .into_iter()
        .map(|i| Keyframe {
            frame_index: i,
            quality: q[i],
            selected_class: series.entries[i].selected_class,
            source,
        })
        .collect();
    Ok(KeyframeReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        frame_count: n,
        params: *params,
        timing_ms: started.elapsed().as_secs_f64() * 1e3,
        keyframes,
    })
}
