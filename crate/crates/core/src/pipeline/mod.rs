//! End-to-end orchestration: frame ingestion, metric runs, GRU scoring,
//! training-pair construction and keyframe selection.

mod pairs;
mod records;
mod select;

pub use pairs::{load_pairs, save_pairs, TrainingPair};
pub use records::{
    read_metric_records, write_frame_records, write_metric_records, FrameRecord, MetricOnlyRecord,
};
pub use select::{select_keyframes, Keyframe, KeyframeReport, SelectParams, SelectionSource};

use crate::classifier::{classify, load_model, synthetic_classifier, ClassifierError, ModelHandle};
use crate::dataset::DatasetError;
use crate::gru::{forward, load_weights, GruError, Mode};
use crate::quality::{quality_from_probs, QualityError, QualitySeries, StabilityWindow};
use crate::transforms::{apply_affine, TtaCatalogue};
use crate::types::{FeatureVector, Frame, ProbVector, QualityScore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no frames found in {0}")]
    NoFrames(PathBuf),
    #[error("frame {file} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    InconsistentDimensions {
        file: String,
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("unreadable file {file}: {reason}")]
    UnreadableFile { file: String, reason: String },
    #[error("no classifier configured (set a model path or synthetic seed)")]
    MissingModel,
    #[error("no recurrent-head weights configured")]
    MissingGruWeights,
    #[error("empty series")]
    EmptySeries,
    #[error("record stream invalid: {0}")]
    BadRecords(String),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Quality(#[from] QualityError),
    #[error(transparent)]
    Gru(#[from] GruError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Where classifier outputs come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSource {
    Onnx { path: PathBuf },
    Synthetic { seed: u64 },
}

/// Full pipeline configuration; mirrors the CLI flags and the JSON config
/// file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub model: Option<ModelSource>,
    pub catalogue: TtaCatalogue,
    pub window: StabilityWindow,
    pub gru_weights: Option<PathBuf>,
    pub select: SelectParams,
    /// Worker threads for classification; 0 means one per CPU.
    pub workers: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> PipelineConfig {
        PipelineConfig {
            model: None,
            catalogue: crate::transforms::default_tta_catalogue(),
            window: StabilityWindow(5),
            gru_weights: None,
            select: SelectParams::default(),
            workers: 0,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn load_classifier(&self) -> Result<ModelHandle, PipelineError> {
        match &self.model {
            None => Err(PipelineError::MissingModel),
            Some(ModelSource::Onnx { path }) => Ok(load_model(path)?),
            Some(ModelSource::Synthetic { seed }) => Ok(synthetic_classifier(*seed)),
        }
    }

    fn thread_pool(&self) -> rayon::ThreadPool {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if self.workers > 0 {
            builder = builder.num_threads(self.workers);
        }
        builder.build().expect("thread pool")
    }
}

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "bmp", "tif", "tiff", "pgm"];

/// Load a directory of image files as grayscale frames, ordered
/// lexicographically by file name. Color images are converted by averaging
/// the three channels.
pub fn ingest_frames(dir: &Path) -> Result<Vec<Frame>, PipelineError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
                    .unwrap_or(false)
        })
        .collect();
    files.sort_by_key(|p| p.file_name().map(|n| n.to_os_string()));
    if files.is_empty() {
        return Err(PipelineError::NoFrames(dir.to_path_buf()));
    }

    let mut frames = Vec::with_capacity(files.len());
    let mut dims: Option<(usize, usize)> = None;
    for file in &files {
        let name = file.display().to_string();
        let img = image::open(file).map_err(|e| PipelineError::UnreadableFile {
            file: name.clone(),
            reason: e.to_string(),
        })?;
        let rgb = img.to_rgb8();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        if let Some((want_w, want_h)) = dims {
            if (w, h) != (want_w, want_h) {
                return Err(PipelineError::InconsistentDimensions {
                    file: name,
                    got_w: w,
                    got_h: h,
                    want_w,
                    want_h,
                });
            }
        } else {
            dims = Some((w, h));
        }
        let pixels: Vec<f32> = rgb
            .pixels()
            .map(|p| (p.0[0] as f32 + p.0[1] as f32 + p.0[2] as f32) / (3.0 * 255.0))
            .collect();
        frames.push(
            Frame::new(pixels, w, h).map_err(|e| PipelineError::UnreadableFile {
                file: name,
                reason: e.to_string(),
            })?,
        );
    }
    Ok(frames)
}

/// Classify every (transform, frame) pair, in order. The frame axis is
/// parallelized; results are reassembled in order so the output does not
/// depend on the worker count.
fn per_transform_probs(
    frames: &[Frame],
    handle: &ModelHandle,
    catalogue: &TtaCatalogue,
) -> Result<Vec<Vec<ProbVector>>, PipelineError> {
    catalogue
        .specs()
        .iter()
        .map(|spec| {
            frames
                .par_iter()
                .map(|frame| {
                    let transformed = apply_affine(frame, spec);
                    classify(handle, &transformed).map(|out| out.probs)
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(PipelineError::from)
        })
        .collect()
}

/// Outcome of a metric run: the quality series plus one record per frame
/// for the output stream.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRun {
    pub series: QualitySeries,
    pub records: Vec<FrameRecord>,
}

/// Run the frame-quality metric over raw frames using the configured
/// classifier.
pub fn run_metric(config: &PipelineConfig, frames: &[Frame]) -> Result<MetricRun, PipelineError> {
    if frames.is_empty() {
        return Err(PipelineError::EmptySeries);
    }
    let handle = config.load_classifier()?;
    let pool = config.thread_pool();
    let probs = pool.install(|| per_transform_probs(frames, &handle, &config.catalogue))?;
    metric_from_probs(&probs, config.window)
}

/// Run the metric on pre-computed probability records (no model needed).
pub fn run_metric_only(
    per_transform: &[Vec<ProbVector>],
    window: StabilityWindow,
) -> Result<MetricRun, PipelineError> {
    metric_from_probs(per_transform, window)
}

fn metric_from_probs(
    per_transform: &[Vec<ProbVector>],
    window: StabilityWindow,
) -> Result<MetricRun, PipelineError> {
    let series = quality_from_probs(per_transform, window)?;
    let records = records::build_frame_records(&per_transform[0], &series);
    Ok(MetricRun { series, records })
}

/// Score frames with the trained recurrent head: one identity-pass
/// classification per frame (no test-time augmentation), features fed in
/// order to the GRU in inference mode.
pub fn run_gru_scoring(
    config: &PipelineConfig,
    frames: &[Frame],
) -> Result<Vec<QualityScore>, PipelineError> {
    let weights_path = config
        .gru_weights
        .as_ref()
        .ok_or(PipelineError::MissingGruWeights)?;
    let model = load_weights(weights_path)?;
    let features = identity_features(config, frames)?;
    Ok(forward(&model, &features, Mode::Inference, 0)?)
}

/// Identity-pass features for every frame, in order.
pub fn identity_features(
    config: &PipelineConfig,
    frames: &[Frame],
) -> Result<Vec<FeatureVector>, PipelineError> {
    if frames.is_empty() {
        return Err(PipelineError::EmptySeries);
    }
    let handle = config.load_classifier()?;
    let pool = config.thread_pool();
    pool.install(|| {
        frames
            .par_iter()
            .map(|frame| classify(&handle, frame).map(|out| out.features))
            .collect::<Result<Vec<_>, _>>()
            .map_err(PipelineError::from)
    })
}

/// Build (features, quality targets) pairs for recurrent-head training:
/// per video, identity-pass features paired with the metric's quality
/// series under the same configuration.
pub fn build_training_pairs(
    config: &PipelineConfig,
    videos: &[(String, Vec<Frame>)],
) -> Result<Vec<TrainingPair>, PipelineError> {
    videos
        .iter()
        .map(|(id, frames)| {
            let features = identity_features(config, frames)?;
            let metric = run_metric(config, frames)?;
            let targets: Vec<QualityScore> =
                metric.series.entries.iter().map(|e| e.quality).collect();
            Ok(TrainingPair {
                video_id: id.clone(),
                features,
                targets,
            })
        })
        .collect()
}
