//! Dataset manifests, patient-disjoint splitting, per-epoch majority-class
//! undersampling, and dataset/video statistics.
//!
//! Manifests are comma-delimited text with the header
//! `patient_id,image_path,label`; video lists use
//! `video_id,duration_s,fps,frame_count`.

use crate::types::ClassLabel;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("empty manifest")]
    EmptyManifest,
    #[error("empty video list")]
    EmptyList,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid entry: {0}")]
    InvalidEntry(String),
    #[error("invalid split fraction {0}; must be in (0, 1)")]
    InvalidFraction(f64),
}

/// One labeled image with its patient identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub patient_id: String,
    pub image_path: String,
    pub label: ClassLabel,
}

/// An ordered list of image entries with unique paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    entries: Vec<ImageEntry>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ImageEntry>) -> Result<DatasetManifest, DatasetError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if e.patient_id.is_empty() || e.image_path.is_empty() {
                return Err(DatasetError::InvalidEntry(format!(
                    "empty patient id or path in {e:?}"
                )));
            }
            if !seen.insert(e.image_path.as_str()) {
                return Err(DatasetError::InvalidEntry(format!(
                    "duplicate image path {}",
                    e.image_path
                )));
            }
        }
        Ok(DatasetManifest { entries })
    }

    pub fn entries(&self) -> &[ImageEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn from_reader(reader: impl Read) -> Result<DatasetManifest, DatasetError> {
        let mut csv_reader = csv::Reader::from_reader(reader);
        let entries: Vec<ImageEntry> = csv_reader
            .deserialize()
            .collect::<Result<_, _>>()
            .map_err(|e| DatasetError::Parse(e.to_string()))?;
        DatasetManifest::new(entries)
    }

    pub fn from_csv_path(path: &Path) -> Result<DatasetManifest, DatasetError> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(writer);
        for e in &self.entries {
            w.serialize(e)
                .map_err(|e| DatasetError::Parse(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Result of a patient-disjoint split.
#[derive(Debug, Clone)]
pub struct SplitResult {
    pub train: DatasetManifest,
    pub val: DatasetManifest,
    /// Train image fraction actually reached; exact targets are generally
    /// unattainable under patient disjointness.
    pub achieved_fraction: f64,
    /// Set when the validation side ended up empty (e.g. a single patient).
    pub degenerate: bool,
}

/// Split by whole patients: patients are shuffled by seed and assigned
/// greedily to the training side until it holds `train_fraction` of the
/// images, everything else goes to validation. Entry order is preserved
/// within each side.
pub fn patient_disjoint_split(
    manifest: &DatasetManifest,
    train_fraction: f64,
    seed: u64,
) -> Result<SplitResult, DatasetError> {
    if manifest.is_empty() {
        return Err(DatasetError::EmptyManifest);
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::InvalidFraction(train_fraction));
    }

    let mut patient_sizes: HashMap<&str, usize> = HashMap::new();
    let mut patient_order: Vec<&str> = Vec::new();
    for e in manifest.entries() {
        let count = patient_sizes.entry(e.patient_id.as_str()).or_insert(0);
        if *count == 0 {
            patient_order.push(e.patient_id.as_str());
        }
        *count += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    patient_order.shuffle(&mut rng);

    let total = manifest.len() as f64;
    let target = train_fraction * total;
    let mut train_patients: HashSet<&str> = HashSet::new();
    let mut train_count = 0usize;
    for patient in &patient_order {
        if (train_count as f64) < target {
            train_patients.insert(patient);
            train_count += patient_sizes[patient];
        }
    }

    let (mut train, mut val) = (Vec::new(), Vec::new());
    for e in manifest.entries() {
        if train_patients.contains(e.patient_id.as_str()) {
            train.push(e.clone());
        } else {
            val.push(e.clone());
        }
    }
    let achieved_fraction = train.len() as f64 / total;
    let degenerate = val.is_empty();
    Ok(SplitResult {
        train: DatasetManifest { entries: train },
        val: DatasetManifest { entries: val },
        achieved_fraction,
        degenerate,
    })
}

/// Default cap on the majority class per epoch.
pub const DEFAULT_UNDERSAMPLE_CAP: usize = 500;

/// Per-epoch undersampling: keep every non-majority entry, and sample
/// `min(cap, available)` not-a-brain entries without replacement using an
/// RNG keyed by (seed, epoch). Entry order is preserved.
pub fn epoch_undersample(
    train: &DatasetManifest,
    epoch: u64,
    seed: u64,
    cap: usize,
) -> DatasetManifest {
    assert!(cap > 0, "undersampling cap must be positive");
    let majority_indices: Vec<usize> = train
        .entries()
        .iter()
        .enumerate()
        .filter(|(_, e)| e.label == ClassLabel::NotABrain)
        .map(|(i, _)| i)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, epoch));
    let mut shuffled = majority_indices.clone();
    shuffled.shuffle(&mut rng);
    let kept: HashSet<usize> = shuffled.into_iter().take(cap).collect();

    let entries = train
        .entries()
        .iter()
        .enumerate()
        .filter(|(i, e)| e.label != ClassLabel::NotABrain || kept.contains(i))
        .map(|(_, e)| e.clone())
        .collect();
    DatasetManifest { entries }
}

/// Splitmix-style combination of seed and epoch.
fn mix(seed: u64, epoch: u64) -> u64 {
    let mut x = seed ^ epoch.wrapping_mul(0x9e3779b97f4a7c15);
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58476d1ce4e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Image and distinct-patient counts for one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassStats {
    pub images: usize,
    pub patients: usize,
}

/// Per-class and overall manifest statistics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestStats {
    pub per_class: [ClassStats; 5],
    pub total_images: usize,
    pub total_patients: usize,
}

impl ManifestStats {
    pub fn class(&self, label: ClassLabel) -> ClassStats {
        self.per_class[label.code()]
    }

    /// Images across the four brain classes.
    pub fn brain_images(&self) -> usize {
        ClassLabel::ALL
            .iter()
            .filter(|c| c.is_brain())
            .map(|c| self.class(*c).images)
            .sum()
    }
}

pub fn manifest_stats(manifest: &DatasetManifest) -> ManifestStats {
    let mut per_class_patients: [HashSet<&str>; 5] = Default::default();
    let mut per_class = [ClassStats::default(); 5];
    let mut all_patients: HashSet<&str> = HashSet::new();
    for e in manifest.entries() {
        per_class[e.label.code()].images += 1;
        per_class_patients[e.label.code()].insert(e.patient_id.as_str());
        all_patients.insert(e.patient_id.as_str());
    }
    for k in 0..5 {
        per_class[k].patients = per_class_patients[k].len();
    }
    ManifestStats {
        per_class,
        total_images: manifest.len(),
        total_patients: all_patients.len(),
    }
}

/// One video's metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoEntry {
    pub video_id: String,
    pub duration_s: f64,
    pub fps: f64,
    pub frame_count: u64,
}

impl VideoEntry {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.duration_s <= 0.0 || self.fps <= 0.0 {
            return Err(DatasetError::InvalidEntry(format!(
                "{}: duration and fps must be positive",
                self.video_id
            )));
        }
        let expected = self.duration_s * self.fps;
        if (self.frame_count as f64 - expected).abs() > self.fps {
            return Err(DatasetError::InvalidEntry(format!(
                "{}: frame count {} inconsistent with {}s at {} fps",
                self.video_id, self.frame_count, self.duration_s, self.fps
            )));
        }
        Ok(())
    }
}

pub fn load_video_list(path: &Path) -> Result<Vec<VideoEntry>, DatasetError> {
    let file = std::fs::File::open(path)?;
    let mut reader = csv::Reader::from_reader(std::io::BufReader::new(file));
    let videos: Vec<VideoEntry> = reader
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| DatasetError::Parse(e.to_string()))?;
    for v in &videos {
        v.validate()?;
    }
    Ok(videos)
}

/// Min/max/mean/std summary (population statistics, divide by N).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

impl Moments {
    fn of(values: impl Iterator<Item = f64> + Clone) -> Moments {
        let n = values.clone().count() as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = values.clone().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Moments {
            min: values.clone().fold(f64::INFINITY, f64::min),
            max: values.fold(f64::NEG_INFINITY, f64::max),
            mean,
            std: var.sqrt(),
        }
    }

    /// Values rounded to 2 decimals, the precision used in reports.
    pub fn rounded(&self) -> Moments {
        let r = |v: f64| (v * 100.0).round() / 100.0;
        Moments {
            min: r(self.min),
            max: r(self.max),
            mean: r(self.mean),
            std: r(self.std),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoStats {
    pub count: usize,
    pub duration: Moments,
    pub fps: Moments,
}

pub fn video_stats(videos: &[VideoEntry]) -> Result<VideoStats, DatasetError> {
    if videos.is_empty() {
        return Err(DatasetError::EmptyList);
    }
    Ok(VideoStats {
        count: videos.len(),
        duration: Moments::of(videos.iter().map(|v| v.duration_s)),
        fps: Moments::of(videos.iter().map(|v| v.fps)),
    })
}
