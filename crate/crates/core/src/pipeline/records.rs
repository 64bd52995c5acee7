//! Per-frame output records and the metric-only input record stream.
//!
//! Both streams are JSON Lines: one object per line. Output records carry
//! the identity-pass probabilities (`p0..p4`), the aggregated vector after
//! hardening, stability filtering and averaging (`v0..v4`), the stability
//! flag for the original video, the quality value and optionally a
//! recurrent-head score. Input records for metric-only runs carry one
//! probability vector per (transform, frame) cell.

use super::PipelineError;
use crate::quality::QualitySeries;
use crate::types::{ClassLabel, ProbVector, NUM_CLASSES};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};

/// One line of metric output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_index: usize,
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
    pub v0: f64,
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    pub v4: f64,
    pub stable: bool,
    pub selected_class: ClassLabel,
    pub quality: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gru_quality: Option<f64>,
}

pub(super) fn build_frame_records(
    identity: &[ProbVector],
    series: &QualitySeries,
) -> Vec<FrameRecord> {
    identity
        .iter()
        .zip(&series.entries)
        .enumerate()
        .map(|(i, (p, entry))| {
            let p = p.values();
            let v = entry.aggregated.values();
            FrameRecord {
                frame_index: i,
                p0: p[0],
                p1: p[1],
                p2: p[2],
                p3: p[3],
                p4: p[4],
                v0: v[0],
                v1: v[1],
                v2: v[2],
                v3: v[3],
                v4: v[4],
                stable: entry.stable_in_original,
                selected_class: entry.selected_class,
                quality: entry.quality.value(),
                gru_quality: None,
            }
        })
        .collect()
}

/// Write records as JSON Lines.
pub fn write_frame_records<W: Write>(
    records: &[FrameRecord],
    mut out: W,
) -> Result<(), PipelineError> {
    for record in records {
        let line =
            serde_json::to_string(record).map_err(|e| PipelineError::BadRecords(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// One line of metric-only input: the probability vector the classifier
/// produced for frame `frame_index` of the copy transformed by catalogue
/// entry `transform_index` (0 is the original video).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricOnlyRecord {
    pub transform_index: usize,
    pub frame_index: usize,
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
}

impl MetricOnlyRecord {
    pub fn probs(&self) -> Result<ProbVector, PipelineError> {
        ProbVector::new([self.p0, self.p1, self.p2, self.p3, self.p4]).map_err(|e| {
            PipelineError::BadRecords(format!(
                "transform {} frame {}: {e}",
                self.transform_index, self.frame_index
            ))
        })
    }
}

/// Parse a JSON Lines stream of [`MetricOnlyRecord`]s into one probability
/// series per transform. Lines may appear in any order but the grid must be
/// complete: transform indices 0..T and frame indices 0..N with every cell
/// present exactly once.
pub fn read_metric_records<R: BufRead>(reader: R) -> Result<Vec<Vec<ProbVector>>, PipelineError> {
    let mut cells: BTreeMap<(usize, usize), ProbVector> = BTreeMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: MetricOnlyRecord = serde_json::from_str(&line)
            .map_err(|e| PipelineError::BadRecords(format!("line {}: {e}", lineno + 1)))?;
        let key = (record.transform_index, record.frame_index);
        if cells.insert(key, record.probs()?).is_some() {
            return Err(PipelineError::BadRecords(format!(
                "duplicate cell: transform {} frame {}",
                key.0, key.1
            )));
        }
    }
    if cells.is_empty() {
        return Err(PipelineError::BadRecords("no records".into()));
    }
    let t_count = cells.keys().map(|(t, _)| t + 1).max().unwrap();
    let n = cells.keys().map(|(_, i)| i + 1).max().unwrap();
    if cells.len() != t_count * n {
        return Err(PipelineError::BadRecords(format!(
            "incomplete grid: {} records for {t_count} transforms x {n} frames",
            cells.len()
        )));
    }
    let mut per_transform = vec![Vec::with_capacity(n); t_count];
    for ((t, _), p) in cells {
        per_transform[t].push(p);
    }
    debug_assert!(per_transform.iter().all(|s| s.len() == n));
    Ok(per_transform)
}

/// Serialize per-transform probability series as a metric-only record
/// stream (the inverse of [`read_metric_records`]).
pub fn write_metric_records<W: Write>(
    per_transform: &[Vec<ProbVector>],
    mut out: W,
) -> Result<(), PipelineError> {
    for (t, series) in per_transform.iter().enumerate() {
        for (i, p) in series.iter().enumerate() {
            let v = p.values();
            debug_assert_eq!(v.len(), NUM_CLASSES);
            let record = MetricOnlyRecord {
                transform_index: t,
                frame_index: i,
                p0: v[0],
                p1: v[1],
                p2: v[2],
                p3: v[3],
                p4: v[4],
            };
            let line = serde_json::to_string(&record)
                .map_err(|e| PipelineError::BadRecords(e.to_string()))?;
            writeln!(out, "{line}")?;
        }
    }
    Ok(())
}
