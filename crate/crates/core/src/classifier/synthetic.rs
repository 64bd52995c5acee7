//! Deterministic synthetic classifier used as a test double.
//!
//! Probabilities are a softmax over seeded random projections of coarse
//! image statistics (quadrant and global mean intensities); features are
//! 1280 seeded random projections of an 8x8 average-pooled copy of the
//! frame. No convolutions, so property tests over thousands of frames run
//! in seconds.

use super::{Backend, ClassifierError, ModelHandle};
use crate::types::{Frame, FEATURE_DIM, NUM_CLASSES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

const INPUT_SIZE: usize = 32;
const POOLED: usize = 8;
const NUM_STATS: usize = 5;

pub(crate) struct SyntheticBackend {
    /// 5x5 projection from image statistics to class logits.
    prob_weights: Vec<f64>,
    /// 1280x64 projection from pooled pixels to features.
    feature_weights: Vec<f64>,
}

/// Build the synthetic backend for a seed. Outputs are fully reproducible
/// per (seed, frame).
pub fn synthetic_classifier(seed: u64) -> ModelHandle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prob_weights = (0..NUM_CLASSES * NUM_STATS)
        .map(|_| rng.gen_range(-4.0..4.0))
        .collect();
    let feature_weights = (0..FEATURE_DIM * POOLED * POOLED)
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    ModelHandle::from_backend(Arc::new(SyntheticBackend {
        prob_weights,
        feature_weights,
    }))
}

impl Backend for SyntheticBackend {
    fn input_size(&self) -> (usize, usize) {
        (INPUT_SIZE, INPUT_SIZE)
    }

    fn run(&self, frame: &Frame) -> Result<(Vec<f64>, Vec<f64>), ClassifierError> {
        debug_assert_eq!(frame.width(), INPUT_SIZE);
        debug_assert_eq!(frame.height(), INPUT_SIZE);

        // Centered statistics: global mean plus the four quadrant means.
        let stats = image_stats(frame);
        let mut logits = [0.0f64; NUM_CLASSES];
        for (k, logit) in logits.iter_mut().enumerate() {
            for (s, &stat) in stats.iter().enumerate() {
                *logit += self.prob_weights[k * NUM_STATS + s] * (2.0 * stat - 1.0);
            }
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let probs: Vec<f64> = exps.iter().map(|e| e / sum).collect();

        let pooled = average_pool(frame);
        let mut features = vec![0.0f64; FEATURE_DIM];
        let dim = POOLED * POOLED;
        for (j, feat) in features.iter_mut().enumerate() {
            let row = &self.feature_weights[j * dim..(j + 1) * dim];
            *feat = row
                .iter()
                .zip(&pooled)
                .map(|(w, p)| w * (2.0 * p - 1.0))
                .sum();
        }
        Ok((probs, features))
    }
}

fn image_stats(frame: &Frame) -> [f64; NUM_STATS] {
    let half = INPUT_SIZE / 2;
    let mut quads = [0.0f64; 4];
    let mut global = 0.0f64;
    for y in 0..INPUT_SIZE {
        for x in 0..INPUT_SIZE {
            let v = frame.get(x, y) as f64;
            global += v;
            let q = (y / half) * 2 + x / half;
            quads[q] += v;
        }
    }
    let quad_n = (half * half) as f64;
    let n = (INPUT_SIZE * INPUT_SIZE) as f64;
    [
        quads[0] / quad_n,
        quads[1] / quad_n,
        quads[2] / quad_n,
        quads[3] / quad_n,
        global / n,
    ]
}

fn average_pool(frame: &Frame) -> Vec<f64> {
    let block = INPUT_SIZE / POOLED;
    let mut out = vec![0.0f64; POOLED * POOLED];
    for by in 0..POOLED {
        for bx in 0..POOLED {
            let mut acc = 0.0;
            for y in 0..block {
                for x in 0..block {
                    acc += frame.get(bx * block + x, by * block + y) as f64;
                }
            }
            out[by * POOLED + bx] = acc / (block * block) as f64;
        }
    }
    out
}
