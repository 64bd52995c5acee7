//! Frame-quality metric.
//!
//! Per transformed copy of the video: harden each frame's probability vector
//! to its winning class, zero out frames whose class flips anywhere inside
//! the stability window, then average the surviving vectors across all
//! transforms and score each frame by the margin of the top class over the
//! rest.

use crate::classifier::{classify, ClassifierError, ModelHandle};
use crate::transforms::{apply_affine, TtaCatalogue};
use crate::types::{
    argmax_class, argmax_slice, ClassLabel, Frame, ProbVector, QualityScore, RawVector, NUM_CLASSES,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QualityError {
    #[error("empty sequence")]
    EmptySequence,
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

/// Symmetric neighborhood radius for the stability filter. Zero means every
/// frame is trivially stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilityWindow(pub usize);

/// One frame's metric outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityEntry {
    pub quality: QualityScore,
    pub selected_class: ClassLabel,
    pub stable_in_original: bool,
    pub aggregated: RawVector,
}

/// Per-frame quality values for a whole video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualitySeries {
    pub entries: Vec<QualityEntry>,
}

impl QualitySeries {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn qualities(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.quality.value()).collect()
    }
}

/// Keep only the winning class probability; all other entries become 0.
/// Ties break toward the lowest class code.
pub fn harden(p: &ProbVector) -> RawVector {
    let winner = argmax_class(p);
    let mut v = [0.0; NUM_CLASSES];
    v[winner.code()] = p.get(winner);
    RawVector::new(v).expect("hardening preserves validity")
}

/// Per-frame stability flags: frame `i` is stable iff every frame within
/// `window` of it (clipped at the sequence boundaries) selects the same
/// class as frame `i`.
pub fn stability_mask(
    classes: &[ClassLabel],
    window: StabilityWindow,
) -> Result<Vec<bool>, QualityError> {
    if classes.is_empty() {
        return Err(QualityError::EmptySequence);
    }
    let n = classes.len();
    let w = window.0;
    let mask = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(w);
            let hi = (i + w).min(n - 1);
            classes[lo..=hi].iter().all(|c| *c == classes[i])
        })
        .collect();
    Ok(mask)
}

/// Harden every frame, then replace unstable frames with the all-zero vector.
pub fn harden_and_filter(
    series: &[ProbVector],
    window: StabilityWindow,
) -> Result<Vec<RawVector>, QualityError> {
    let classes: Vec<ClassLabel> = series.iter().map(argmax_class).collect();
    let mask = stability_mask(&classes, window)?;
    Ok(series
        .iter()
        .zip(&mask)
        .map(|(p, &stable)| if stable { harden(p) } else { RawVector::zero() })
        .collect())
}

/// Average the per-transform vectors frame by frame.
pub fn tta_aggregate(per_transform: &[Vec<RawVector>]) -> Result<Vec<RawVector>, QualityError> {
    let first = per_transform.first().ok_or(QualityError::EmptySequence)?;
    let n = first.len();
    if let Some((t, seq)) = per_transform.iter().enumerate().find(|(_, s)| s.len() != n) {
        return Err(QualityError::LengthMismatch(format!(
            "transform {t} has {} frames, expected {n}",
            seq.len()
        )));
    }
    let t_count = per_transform.len() as f64;
    Ok((0..n)
        .map(|i| {
            let mut acc = [0.0; NUM_CLASSES];
            for seq in per_transform {
                for (a, &v) in acc.iter_mut().zip(seq[i].values()) {
                    *a += v;
                }
            }
            for a in acc.iter_mut() {
                *a /= t_count;
            }
            RawVector::new(acc).expect("mean of valid raw vectors is valid")
        })
        .collect())
}

/// Top entry minus the sum of the others, clamped to [0, 1].
pub fn margin_quality(v: &RawVector) -> QualityScore {
    let values = v.values();
    let winner = argmax_slice(values).code();
    let rest: f64 = values
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != winner)
        .map(|(_, x)| x)
        .sum();
    QualityScore::new((values[winner] - rest).clamp(0.0, 1.0)).unwrap()
}

/// Run the whole metric on already-computed probability series, one series
/// per transform with the original video's series first.
pub fn quality_from_probs(
    per_transform: &[Vec<ProbVector>],
    window: StabilityWindow,
) -> Result<QualitySeries, QualityError> {
    if per_transform.is_empty() || per_transform[0].is_empty() {
        return Err(QualityError::EmptySequence);
    }
    let filtered: Vec<Vec<RawVector>> = per_transform
        .iter()
        .map(|series| harden_and_filter(series, window))
        .collect::<Result<_, _>>()?;
    let aggregated = tta_aggregate(&filtered)?;

    let original_classes: Vec<ClassLabel> = per_transform[0].iter().map(argmax_class).collect();
    let original_mask = stability_mask(&original_classes, window)?;

    let entries = aggregated
        .into_iter()
        .zip(original_mask)
        .map(|(agg, stable)| {
            let (quality, selected_class) = if agg.is_zero() {
                (QualityScore::ZERO, ClassLabel::NotABrain)
            } else {
                (margin_quality(&agg), argmax_slice(agg.values()))
            };
            QualityEntry {
                quality,
                selected_class,
                stable_in_original: stable,
                aggregated: agg,
            }
        })
        .collect();
    Ok(QualitySeries { entries })
}

/// End-to-end metric over raw frames: transform each frame by every
/// catalogue entry, classify, then run the hardening/stability/aggregation
/// pipeline. Classification is parallelized per frame; results are
/// reassembled in order, so output is independent of worker count.
pub fn compute_quality_series(
    frames: &[Frame],
    handle: &ModelHandle,
    catalogue: &TtaCatalogue,
    window: StabilityWindow,
) -> Result<QualitySeries, QualityError> {
    if frames.is_empty() {
        return Err(QualityError::EmptySequence);
    }
    let per_transform: Vec<Vec<ProbVector>> = catalogue
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
        })
        .collect::<Result<_, _>>()?;
    quality_from_probs(&per_transform, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::synthetic_classifier;
    use crate::transforms::default_tta_catalogue;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pv(v: [f64; 5]) -> ProbVector {
        ProbVector::new(v).unwrap()
    }

    use ClassLabel::*;

    #[test]
    fn harden_keeps_only_the_winner() {
        assert_eq!(
            harden(&pv([0.7, 0.1, 0.1, 0.05, 0.05])).values(),
            &[0.7, 0.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(
            harden(&pv([0.2, 0.2, 0.2, 0.2, 0.2])).values(),
            &[0.2, 0.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(
            harden(&pv([0.0, 0.0, 1.0, 0.0, 0.0])).values(),
            &[0.0, 0.0, 1.0, 0.0, 0.0]
        );
    }

    #[test]
    fn stability_constant_sequence() {
        let classes = vec![TransThalamic; 4];
        let mask = stability_mask(&classes, StabilityWindow(1)).unwrap();
        assert_eq!(mask, vec![true; 4]);
    }

    #[test]
    fn stability_flip_in_the_middle() {
        let classes = vec![
            TransThalamic,
            TransThalamic,
            TransThalamic,
            NotABrain,
            TransThalamic,
            TransThalamic,
            TransThalamic,
        ];
        let mask = stability_mask(&classes, StabilityWindow(1)).unwrap();
        assert_eq!(mask, vec![true, true, false, false, false, true, true]);
    }

    #[test]
    fn stability_zero_window_is_all_stable() {
        let classes = vec![TransThalamic, NotABrain, BrainOther];
        let mask = stability_mask(&classes, StabilityWindow(0)).unwrap();
        assert_eq!(mask, vec![true; 3]);
    }

    #[test]
    fn stability_empty_sequence_is_an_error() {
        assert!(matches!(
            stability_mask(&[], StabilityWindow(1)),
            Err(QualityError::EmptySequence)
        ));
    }

    #[test]
    fn harden_and_filter_zeroes_unstable_frames() {
        let series = vec![
            pv([0.9, 0.1, 0.0, 0.0, 0.0]),
            pv([0.8, 0.2, 0.0, 0.0, 0.0]),
            pv([0.1, 0.9, 0.0, 0.0, 0.0]),
            pv([0.7, 0.3, 0.0, 0.0, 0.0]),
        ];
        let out = harden_and_filter(&series, StabilityWindow(1)).unwrap();
        assert_eq!(out[0].values(), &[0.9, 0.0, 0.0, 0.0, 0.0]);
        assert!(out[1].is_zero());
        assert!(out[2].is_zero());
        assert!(out[3].is_zero());
    }

    #[test]
    fn harden_and_filter_single_frame_is_stable() {
        let out = harden_and_filter(&[pv([0.6, 0.4, 0.0, 0.0, 0.0])], StabilityWindow(10)).unwrap();
        assert_eq!(out[0].values(), &[0.6, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn aggregate_single_transform_is_identity() {
        let seq = vec![RawVector::new([0.5, 0.0, 0.0, 0.0, 0.0]).unwrap()];
        let out = tta_aggregate(std::slice::from_ref(&seq)).unwrap();
        assert_eq!(out, seq);
    }

    #[test]
    fn aggregate_two_transforms_averages() {
        let a = vec![RawVector::new([0.9, 0.0, 0.0, 0.0, 0.0]).unwrap()];
        let b = vec![RawVector::new([0.0, 0.8, 0.0, 0.0, 0.0]).unwrap()];
        let out = tta_aggregate(&[a, b]).unwrap();
        assert_eq!(out[0].values(), &[0.45, 0.4, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn aggregate_matches_naive_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = 14;
        let n = 25;
        let per: Vec<Vec<RawVector>> = (0..t)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        let mut v = [0.0; 5];
                        v[rng.gen_range(0..5)] = rng.gen_range(0.0..1.0);
                        RawVector::new(v).unwrap()
                    })
                    .collect()
            })
            .collect();
        let out = tta_aggregate(&per).unwrap();
        for i in 0..n {
            for k in 0..5 {
                let expected: f64 =
                    per.iter().map(|seq| seq[i].values()[k]).sum::<f64>() / t as f64;
                assert!((out[i].values()[k] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn aggregate_length_mismatch_is_reported() {
        let a = vec![RawVector::zero(), RawVector::zero()];
        let b = vec![RawVector::zero()];
        assert!(matches!(
            tta_aggregate(&[a, b]),
            Err(QualityError::LengthMismatch(_))
        ));
    }

    #[test]
    fn margin_examples() {
        let v = RawVector::new([0.45, 0.40, 0.0, 0.0, 0.0]).unwrap();
        assert!((margin_quality(&v).value() - 0.05).abs() < 1e-12);
        assert_eq!(margin_quality(&RawVector::zero()).value(), 0.0);
        // Raw margin 0.114 - 0.226 = -0.112 clamps to zero.
        let v = RawVector::new([0.113, 0.113, 0.114, 0.0, 0.0]).unwrap();
        assert_eq!(margin_quality(&v).value(), 0.0);
    }

    #[test]
    fn constant_video_gives_constant_series() {
        let handle = synthetic_classifier(11);
        let frame = Frame::new(vec![0.4; 24 * 24], 24, 24).unwrap();
        let frames = vec![frame; 10];
        let series = compute_quality_series(
            &frames,
            &handle,
            &default_tta_catalogue(),
            StabilityWindow(2),
        )
        .unwrap();
        assert_eq!(series.len(), 10);
        for e in &series.entries[1..] {
            assert_eq!(e, &series.entries[0]);
        }
    }

    #[test]
    fn identity_only_catalogue_quality_is_max_prob() {
        let handle = synthetic_classifier(4);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let frames: Vec<Frame> = (0..8)
            .map(|_| {
                let px: Vec<f32> = (0..16 * 16).map(|_| rng.gen_range(0.0..=1.0)).collect();
                Frame::new(px, 16, 16).unwrap()
            })
            .collect();
        let catalogue = TtaCatalogue::new(vec![crate::transforms::AffineSpec::Identity]).unwrap();
        let series =
            compute_quality_series(&frames, &handle, &catalogue, StabilityWindow(0)).unwrap();
        for (frame, entry) in frames.iter().zip(&series.entries) {
            let probs = classify(&handle, frame).unwrap().probs;
            let max = probs.values().iter().cloned().fold(f64::MIN, f64::max);
            assert!((entry.quality.value() - max).abs() < 1e-12);
        }
    }

    #[test]
    fn series_matches_naive_oracle() {
        // Independent straight-line recomputation of all metric steps.
        fn oracle(per_transform: &[Vec<ProbVector>], w: usize) -> Vec<f64> {
            let t_count = per_transform.len();
            let n = per_transform[0].len();
            let mut quality = vec![0.0; n];
            for i in 0..n {
                let mut agg = [0.0f64; 5];
                for series in per_transform {
                    let classes: Vec<usize> = series
                        .iter()
                        .map(|p| {
                            let v = p.values();
                            (0..5).fold(0, |b, k| if v[k] > v[b] { k } else { b })
                        })
                        .collect();
                    let lo = i.saturating_sub(w);
                    let hi = (i + w).min(n - 1);
                    let stable = (lo..=hi).all(|j| classes[j] == classes[i]);
                    if stable {
                        agg[classes[i]] += series[i].values()[classes[i]];
                    }
                }
                let best = (0..5).fold(0, |b, k| if agg[k] > agg[b] { k } else { b });
                let rest: f64 = (0..5).filter(|k| *k != best).map(|k| agg[k]).sum();
                quality[i] = ((agg[best] - rest) / t_count as f64).clamp(0.0, 1.0);
            }
            quality
        }

        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let t = rng.gen_range(1..8usize);
            let n = rng.gen_range(1..50usize);
            let w = rng.gen_range(0..6usize);
            let per: Vec<Vec<ProbVector>> = (0..t)
                .map(|_| {
                    (0..n)
                        .map(|_| {
                            let raw: Vec<f64> = (0..5).map(|_| rng.gen_range(0.01..1.0)).collect();
                            let s: f64 = raw.iter().sum();
                            let mut p = [0.0; 5];
                            for k in 0..5 {
                                p[k] = raw[k] / s;
                            }
                            ProbVector::new(p).unwrap()
                        })
                        .collect()
                })
                .collect();
            let series = quality_from_probs(&per, StabilityWindow(w)).unwrap();
            let expected = oracle(&per, w);
            for (e, q) in series.qualities().iter().zip(&expected) {
                assert!((e - q).abs() < 1e-12, "pipeline {e} vs oracle {q}");
            }
        }
    }
}
