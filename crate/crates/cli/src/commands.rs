//! Subcommand definitions and implementations.

use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use uskeyframe::dataset::{
    epoch_undersample, load_video_list, manifest_stats, patient_disjoint_split, video_stats,
    DatasetManifest, DEFAULT_UNDERSAMPLE_CAP,
};
use uskeyframe::gru::{save_weights, train, GruHeadModel, TrainConfig, TrainingSequence};
use uskeyframe::pipeline::{
    build_training_pairs, ingest_frames, read_metric_records, run_gru_scoring, run_metric,
    run_metric_only, save_pairs, select_keyframes, write_frame_records, FrameRecord, MetricRun,
    ModelSource, PipelineConfig, SelectParams, SelectionSource,
};
use uskeyframe::quality::{QualityEntry, QualitySeries, StabilityWindow};
use uskeyframe::transforms::{default_tta_catalogue, TtaCatalogue};
use uskeyframe::types::{QualityScore, RawVector};

use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "uskeyframe",
    version,
    about = "Keyframe detection for fetal-brain ultrasound videos"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run the frame-quality metric over a directory of frames
    Score(ScoreArgs),
    /// Run the metric on pre-computed probability records, no model needed
    MetricOnly(MetricOnlyArgs),
    /// Score frames with a trained recurrent head
    GruScore(GruScoreArgs),
    /// Train the recurrent head on a pairs file
    GruTrain(GruTrainArgs),
    /// Build recurrent-head training pairs from frame directories
    BuildPairs(BuildPairsArgs),
    /// Select keyframes from a records file
    Select(SelectArgs),
    /// Split a manifest into patient-disjoint train/validation sets
    SplitDataset(SplitDatasetArgs),
    /// Undersample the majority class for one training epoch
    SampleEpoch(SampleEpochArgs),
    /// Summarize manifest and video-list statistics
    Stats(StatsArgs),
}

#[derive(Args)]
pub struct ModelArgs {
    /// Path to an ONNX classifier model
    #[arg(long)]
    model: Option<PathBuf>,
    /// Use the built-in synthetic classifier with this seed instead of a model file
    #[arg(long, conflicts_with = "model")]
    synthetic_seed: Option<u64>,
}

impl ModelArgs {
    fn source(&self) -> Result<ModelSource, CliError> {
        match (&self.model, self.synthetic_seed) {
            (Some(path), None) => Ok(ModelSource::Onnx { path: path.clone() }),
            (None, Some(seed)) => Ok(ModelSource::Synthetic { seed }),
            _ => Err(CliError::Usage(
                "provide exactly one of --model or --synthetic-seed".into(),
            )),
        }
    }
}

#[derive(Args)]
pub struct MetricFlags {
    /// Stability window radius in frames
    #[arg(long, default_value_t = 5)]
    window: usize,
    /// JSON file overriding the default augmentation catalogue
    #[arg(long)]
    tta_catalogue: Option<PathBuf>,
    /// Worker threads for classification; 0 means one per CPU
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Seed controlling all randomness in this run
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl MetricFlags {
    fn catalogue(&self) -> Result<TtaCatalogue, CliError> {
        match &self.tta_catalogue {
            None => Ok(default_tta_catalogue()),
            Some(path) => Ok(TtaCatalogue::from_json(&fs::read_to_string(path)?)?),
        }
    }
}

#[derive(Args)]
pub struct SelectFlags {
    /// Drop candidate keyframes below this quality
    #[arg(long, default_value_t = 0.0)]
    min_quality: f64,
    /// Selected keyframes must be more than this many frames apart
    #[arg(long, default_value_t = 0)]
    nms_radius: usize,
    /// Keep at most this many keyframes
    #[arg(long, default_value_t = 10)]
    top_k: usize,
}

impl SelectFlags {
    fn params(&self) -> SelectParams {
        SelectParams {
            min_quality: self.min_quality,
            nms_radius: self.nms_radius,
            top_k: self.top_k,
        }
    }
}

#[derive(Args)]
pub struct ScoreArgs {
    /// Directory of frame images, processed in file-name order
    #[arg(long)]
    frames: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    metric: MetricFlags,
    /// Optional trained recurrent-head weights; adds gru_quality to records
    #[arg(long)]
    gru_weights: Option<PathBuf>,
    #[command(flatten)]
    select: SelectFlags,
    /// Output records file (JSON Lines, one record per frame)
    #[arg(long)]
    out: PathBuf,
    /// Optional keyframe report (JSON)
    #[arg(long)]
    report: Option<PathBuf>,
}

pub fn score(args: ScoreArgs) -> Result<(), CliError> {
    let config = PipelineConfig {
        model: Some(args.model.source()?),
        catalogue: args.metric.catalogue()?,
        window: StabilityWindow(args.metric.window),
        gru_weights: args.gru_weights.clone(),
        select: args.select.params(),
        workers: args.metric.workers,
        seed: args.metric.seed,
    };
    let frames = ingest_frames(&args.frames)?;
    let mut run = run_metric(&config, &frames)?;
    if config.gru_weights.is_some() {
        let scores = run_gru_scoring(&config, &frames)?;
        for (record, score) in run.records.iter_mut().zip(scores) {
            record.gru_quality = Some(score.value());
        }
    }
    write_records(&run, &args.out)?;
    if let Some(report_path) = &args.report {
        let report = select_keyframes(&run.series, &config.select, SelectionSource::Metric)?;
        write_json(&report, report_path)?;
    }
    Ok(())
}

#[derive(Args)]
pub struct MetricOnlyArgs {
    /// Input probability records (JSON Lines, one per frame per transform)
    #[arg(long)]
    records: PathBuf,
    /// Stability window radius in frames
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[command(flatten)]
    select: SelectFlags,
    /// Output records file (JSON Lines, one record per frame)
    #[arg(long)]
    out: PathBuf,
    /// Optional keyframe report (JSON)
    #[arg(long)]
    report: Option<PathBuf>,
}

pub fn metric_only(args: MetricOnlyArgs) -> Result<(), CliError> {
    let file = fs::File::open(&args.records)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.records.display())))?;
    let per_transform = read_metric_records(BufReader::new(file))?;
    let run = run_metric_only(&per_transform, StabilityWindow(args.window))?;
    write_records(&run, &args.out)?;
    if let Some(report_path) = &args.report {
        let report = select_keyframes(&run.series, &args.select.params(), SelectionSource::Metric)?;
        write_json(&report, report_path)?;
    }
    Ok(())
}

#[derive(Args)]
pub struct GruScoreArgs {
    /// Directory of frame images, processed in file-name order
    #[arg(long)]
    frames: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Trained recurrent-head weights (train them with `uskeyframe gru-train`)
    #[arg(long)]
    gru_weights: Option<PathBuf>,
    /// Worker threads for classification; 0 means one per CPU
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output scores file (JSON Lines: frame_index, gru_quality)
    #[arg(long)]
    out: PathBuf,
}

pub fn gru_score(args: GruScoreArgs) -> Result<(), CliError> {
    let weights = args.gru_weights.ok_or_else(|| {
        CliError::Model(
            "no recurrent-head weights: pass --gru-weights FILE \
             (train one with `uskeyframe gru-train`)"
                .into(),
        )
    })?;
    let config = PipelineConfig {
        model: Some(args.model.source()?),
        gru_weights: Some(weights),
        workers: args.workers,
        ..PipelineConfig::default()
    };
    let frames = ingest_frames(&args.frames)?;
    let scores = run_gru_scoring(&config, &frames)?;
    let mut out = BufWriter::new(fs::File::create(&args.out)?);
    for (i, score) in scores.iter().enumerate() {
        writeln!(
            out,
            "{}",
            serde_json::json!({ "frame_index": i, "gru_quality": score.value() })
        )?;
    }
    Ok(())
}

#[derive(Args)]
pub struct GruTrainArgs {
    /// Training pairs file produced by `build-pairs`
    #[arg(long)]
    pairs: PathBuf,
    /// Output weights file (JSON)
    #[arg(long)]
    out: PathBuf,
    /// Optional training history output (JSON)
    #[arg(long)]
    history: Option<PathBuf>,
    /// Hidden state width of each recurrent layer
    #[arg(long, default_value_t = 128)]
    hidden: usize,
    /// Fraction of sequences held out for validation
    #[arg(long, default_value_t = 0.2)]
    val_fraction: f64,
    /// Learning rate
    #[arg(long, default_value_t = 5e-4)]
    lr: f64,
    /// Decoupled weight decay
    #[arg(long, default_value_t = 1e-5)]
    weight_decay: f64,
    /// Maximum training epochs
    #[arg(long, default_value_t = 60)]
    max_epochs: usize,
    /// Early-stop patience in epochs
    #[arg(long, default_value_t = 20)]
    patience: usize,
    /// Classical momentum coefficient; 0 disables it
    #[arg(long, default_value_t = 0.0)]
    momentum: f64,
    /// Seed controlling initialization, shuffling, dropout and the split
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub fn gru_train(args: GruTrainArgs) -> Result<(), CliError> {
    if !(0.0 < args.val_fraction && args.val_fraction < 1.0) {
        return Err(CliError::Usage(format!(
            "--val-fraction {} must be in (0, 1)",
            args.val_fraction
        )));
    }
    let pairs = uskeyframe::pipeline::load_pairs(&args.pairs)?;
    if pairs.len() < 2 {
        return Err(CliError::Data(format!(
            "need at least 2 sequences to split train/validation, got {}",
            pairs.len()
        )));
    }
    let input_dim = pairs[0].features[0].values().len();
    let mut sequences = Vec::with_capacity(pairs.len());
    for pair in &pairs {
        if pair.features[0].values().len() != input_dim {
            return Err(CliError::Data(format!(
                "video {} has feature width {}, expected {input_dim}",
                pair.video_id,
                pair.features[0].values().len()
            )));
        }
        sequences.push(TrainingSequence::new(&pair.features, &pair.targets)?);
    }

    let mut order: Vec<usize> = (0..sequences.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed ^ 0x9e3779b97f4a7c15);
    order.shuffle(&mut rng);
    let val_count = ((sequences.len() as f64 * args.val_fraction).round() as usize)
        .clamp(1, sequences.len() - 1);
    let (val_idx, train_idx) = order.split_at(val_count);
    let train_set: Vec<TrainingSequence> =
        train_idx.iter().map(|&i| sequences[i].clone()).collect();
    let val_set: Vec<TrainingSequence> = val_idx.iter().map(|&i| sequences[i].clone()).collect();

    let model = GruHeadModel::with_dims(input_dim, args.hidden, args.seed);
    let cfg = TrainConfig {
        learning_rate: args.lr,
        weight_decay: args.weight_decay,
        max_epochs: args.max_epochs,
        early_stop_patience: args.patience,
        momentum: args.momentum,
        seed: args.seed,
    };
    let (best, history) = train(&model, &train_set, &val_set, &cfg)?;
    save_weights(&best, &args.out)?;
    if let Some(path) = &args.history {
        write_json(&history, path)?;
    }
    eprintln!(
        "trained {} epochs ({} train / {} val sequences), best val loss {:.6} at epoch {}",
        history.epochs.len(),
        train_set.len(),
        val_set.len(),
        history.epochs[history.best_epoch].val_loss,
        history.best_epoch + 1
    );
    Ok(())
}

#[derive(Args)]
pub struct BuildPairsArgs {
    /// Directory whose subdirectories each hold one video's frames
    #[arg(long)]
    videos: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    metric: MetricFlags,
    /// Output pairs file
    #[arg(long)]
    out: PathBuf,
}

pub fn build_pairs(args: BuildPairsArgs) -> Result<(), CliError> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(&args.videos)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no video subdirectories found",
            args.videos.display()
        )));
    }
    let mut videos = Vec::with_capacity(dirs.len());
    for dir in &dirs {
        let id = dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| CliError::Data(format!("unusable directory name {dir:?}")))?
            .to_string();
        videos.push((id, ingest_frames(dir)?));
    }
    let config = PipelineConfig {
        model: Some(args.model.source()?),
        catalogue: args.metric.catalogue()?,
        window: StabilityWindow(args.metric.window),
        workers: args.metric.workers,
        seed: args.metric.seed,
        ..PipelineConfig::default()
    };
    let pairs = build_training_pairs(&config, &videos)?;
    save_pairs(&pairs, &args.out)?;
    eprintln!(
        "wrote {} training pairs to {}",
        pairs.len(),
        args.out.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct SelectArgs {
    /// Records file produced by `score` or `metric-only`
    #[arg(long)]
    records: PathBuf,
    /// Which quality column to select on
    #[arg(long, value_parser = ["metric", "gru"], default_value = "metric")]
    source: String,
    #[command(flatten)]
    select: SelectFlags,
    /// Output keyframe report (JSON)
    #[arg(long)]
    out: PathBuf,
}

pub fn select(args: SelectArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.records)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.records.display())))?;
    let mut records: Vec<FrameRecord> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(line).map_err(|e| {
            CliError::Data(format!("{}:{}: {e}", args.records.display(), lineno + 1))
        })?);
    }
    records.sort_by_key(|r| r.frame_index);
    if records.iter().enumerate().any(|(i, r)| r.frame_index != i) {
        return Err(CliError::Data(
            "records must cover frame indices 0..n exactly once".into(),
        ));
    }
    let source = match args.source.as_str() {
        "gru" => SelectionSource::Gru,
        _ => SelectionSource::Metric,
    };
    let series = series_from_records(&records, source)?;
    let report = select_keyframes(&series, &args.select.params(), source)?;
    write_json(&report, &args.out)?;
    Ok(())
}

fn series_from_records(
    records: &[FrameRecord],
    source: SelectionSource,
) -> Result<QualitySeries, CliError> {
    let mut entries = Vec::with_capacity(records.len());
    for r in records {
        let quality = match source {
            SelectionSource::Metric => r.quality,
            SelectionSource::Gru => r.gru_quality.ok_or_else(|| {
                CliError::Data(format!(
                    "frame {}: no gru_quality in records; rerun `score` with --gru-weights",
                    r.frame_index
                ))
            })?,
        };
        let aggregated = RawVector::new([r.v0, r.v1, r.v2, r.v3, r.v4])
            .map_err(|e| CliError::Data(format!("frame {}: {e}", r.frame_index)))?;
        entries.push(QualityEntry {
            quality: QualityScore::new(quality)
                .map_err(|e| CliError::Data(format!("frame {}: {e}", r.frame_index)))?,
            selected_class: r.selected_class,
            stable_in_original: r.stable,
            aggregated,
        });
    }
    Ok(QualitySeries { entries })
}

#[derive(Args)]
pub struct SplitDatasetArgs {
    /// Image manifest CSV (patient_id, image_path, label)
    #[arg(long)]
    manifest: PathBuf,
    /// Fraction of images to place in the training side
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Seed for the patient shuffle
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV for the training side
    #[arg(long)]
    out_train: PathBuf,
    /// Output CSV for the validation side
    #[arg(long)]
    out_val: PathBuf,
}

pub fn split_dataset(args: SplitDatasetArgs) -> Result<(), CliError> {
    let manifest = DatasetManifest::from_csv_path(&args.manifest)?;
    let split = patient_disjoint_split(&manifest, args.train_fraction, args.seed)?;
    split.train.write_csv(fs::File::create(&args.out_train)?)?;
    split.val.write_csv(fs::File::create(&args.out_val)?)?;
    eprintln!(
        "train {} images, val {} images, achieved fraction {:.4}{}",
        split.train.len(),
        split.val.len(),
        split.achieved_fraction,
        if split.degenerate {
            " (degenerate: validation side is empty)"
        } else {
            ""
        }
    );
    Ok(())
}

#[derive(Args)]
pub struct SampleEpochArgs {
    /// Training manifest CSV
    #[arg(long)]
    manifest: PathBuf,
    /// Epoch number; each epoch draws a fresh majority-class subset
    #[arg(long)]
    epoch: u64,
    /// Seed shared across epochs
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cap on not-a-brain entries per epoch
    #[arg(long, default_value_t = DEFAULT_UNDERSAMPLE_CAP)]
    cap: usize,
    /// Output CSV
    #[arg(long)]
    out: PathBuf,
}

pub fn sample_epoch(args: SampleEpochArgs) -> Result<(), CliError> {
    if args.cap == 0 {
        return Err(CliError::Usage("--cap must be at least 1".into()));
    }
    let manifest = DatasetManifest::from_csv_path(&args.manifest)?;
    let sampled = epoch_undersample(&manifest, args.epoch, args.seed, args.cap);
    sampled.write_csv(fs::File::create(&args.out)?)?;
    eprintln!("epoch {}: {} images", args.epoch, sampled.len());
    Ok(())
}

#[derive(Args)]
pub struct StatsArgs {
    /// Image manifest CSV to summarize
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Video list CSV to summarize
    #[arg(long)]
    videos: Option<PathBuf>,
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn stats(args: StatsArgs) -> Result<(), CliError> {
    if args.manifest.is_none() && args.videos.is_none() {
        return Err(CliError::Usage("provide --manifest and/or --videos".into()));
    }
    let mut doc = serde_json::Map::new();
    if let Some(path) = &args.manifest {
        let manifest = DatasetManifest::from_csv_path(path)?;
        doc.insert(
            "manifest".into(),
            serde_json::to_value(manifest_stats(&manifest))?,
        );
    }
    if let Some(path) = &args.videos {
        let videos = load_video_list(path)?;
        doc.insert(
            "videos".into(),
            serde_json::to_value(video_stats(&videos)?)?,
        );
    }
    let text = serde_json::to_string_pretty(&serde_json::Value::Object(doc))?;
    match &args.out {
        Some(path) => fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn write_records(run: &MetricRun, path: &Path) -> Result<(), CliError> {
    let out = BufWriter::new(fs::File::create(path)?);
    write_frame_records(&run.records, out)?;
    Ok(())
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}
