//! Training loop: per-sequence stochastic gradient descent with decoupled
//! weight decay and early stopping on validation loss.

use super::{
    backward, features_to_matrix, forward_values, loss, Gradients, GruError, GruHeadModel,
    GruLayerWeights, Mode,
};
use crate::types::{FeatureVector, QualityScore};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One training example: a frame-feature sequence and its per-frame quality
/// targets.
#[derive(Debug, Clone)]
pub struct TrainingSequence {
    pub features: Array2<f64>,
    pub targets: Vec<f64>,
}

impl TrainingSequence {
    pub fn new(
        features: &[FeatureVector],
        targets: &[QualityScore],
    ) -> Result<TrainingSequence, GruError> {
        if features.is_empty() {
            return Err(GruError::EmptySequence);
        }
        if features.len() != targets.len() {
            return Err(GruError::LengthMismatch(format!(
                "{} features vs {} targets",
                features.len(),
                targets.len()
            )));
        }
        Ok(TrainingSequence {
            features: features_to_matrix(features),
            targets: targets.iter().map(|q| q.value()).collect(),
        })
    }

    /// Raw constructor for synthetic tasks and tests.
    pub fn from_raw(
        features: Array2<f64>,
        targets: Vec<f64>,
    ) -> Result<TrainingSequence, GruError> {
        if features.nrows() == 0 {
            return Err(GruError::EmptySequence);
        }
        if features.nrows() != targets.len() {
            return Err(GruError::LengthMismatch(format!(
                "{} rows vs {} targets",
                features.nrows(),
                targets.len()
            )));
        }
        Ok(TrainingSequence { features, targets })
    }
}

/// Optimizer and schedule constants. Defaults are the published recurrent
/// training settings: learning rate 5e-4, weight decay 1e-5, at most 60
/// epochs, early-stop patience of 20 epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    /// Classical momentum coefficient; 0 disables it.
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            learning_rate: 5e-4,
            weight_decay: 1e-5,
            max_epochs: 60,
            early_stop_patience: 20,
            momentum: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), GruError> {
        if self.learning_rate <= 0.0
            || self.weight_decay < 0.0
            || self.max_epochs == 0
            || self.early_stop_patience == 0
            || self.early_stop_patience > self.max_epochs
            || !(0.0..1.0).contains(&self.momentum)
        {
            return Err(GruError::ShapeMismatch(format!(
                "invalid training config: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Index into `epochs` of the epoch with the lowest validation loss.
    pub best_epoch: usize,
    pub stop_reason: StopReason,
}

/// Train a model. One gradient step per sequence (lengths vary), decoupled
/// weight decay after each step, validation in inference mode after each
/// epoch. Returns the weights from the best validation epoch together with
/// the full history. Single-threaded and bit-deterministic for fixed seeds.
pub fn train(
    model: &GruHeadModel,
    train_set: &[TrainingSequence],
    val_set: &[TrainingSequence],
    cfg: &TrainConfig,
) -> Result<(GruHeadModel, TrainHistory), GruError> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(GruError::EmptyDataset);
    }
    cfg.validate()?;
    model.validate()?;

    let mut current = model.clone();
    let mut velocity = (cfg.momentum > 0.0).then(|| Gradients::zeros(&current));
    let mut best = current.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut since_improvement = 0usize;
    let mut epochs = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 0..cfg.max_epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, epoch as u64, 0));
        order.shuffle(&mut shuffle_rng);

        let mut train_loss_acc = 0.0;
        for (step, &idx) in order.iter().enumerate() {
            let seq = &train_set[idx];
            let dropout_seed = mix(cfg.seed, epoch as u64, 1 + step as u64);
            let (grads, l) = backward(&current, &seq.features.view(), &seq.targets, dropout_seed)?;
            train_loss_acc += l;
            apply_update(&mut current, &grads, velocity.as_mut(), cfg);
        }
        let train_loss = train_loss_acc / train_set.len() as f64;

        let mut val_loss_acc = 0.0;
        for seq in val_set {
            let out = forward_values(&current, &seq.features.view(), Mode::Inference, 0)?;
            val_loss_acc += loss(&out, &seq.targets)?;
        }
        let val_loss = val_loss_acc / val_set.len() as f64;
        epochs.push(EpochRecord {
            train_loss,
            val_loss,
        });

        if val_loss < best_val {
            best_val = val_loss;
            best = current.clone();
            best_epoch = epoch;
            since_improvement = 0;
        } else {
            since_improvement += 1;
            if since_improvement >= cfg.early_stop_patience {
                stop_reason = StopReason::EarlyStop;
                break;
            }
        }
    }

    Ok((
        best,
        TrainHistory {
            epochs,
            best_epoch,
            stop_reason,
        },
    ))
}

/// Deterministic seed derivation, splitmix-style.
fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut x = seed
        .wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add(a.wrapping_mul(0xbf58476d1ce4e5b9))
        .wrapping_add(b.wrapping_mul(0x94d049bb133111eb));
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58476d1ce4e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn apply_update(
    model: &mut GruHeadModel,
    grads: &Gradients,
    velocity: Option<&mut Gradients>,
    cfg: &TrainConfig,
) {
    let lr = cfg.learning_rate;
    match velocity {
        None => {
            step_layer(&mut model.layer1, &grads.layer1, lr);
            step_layer(&mut model.layer2, &grads.layer2, lr);
            model.dense_w.scaled_add(-lr, &grads.dense_w);
            model.dense_b -= lr * grads.dense_b;
        }
        Some(vel) => {
            momentum_layer(&mut vel.layer1, &grads.layer1, cfg.momentum);
            momentum_layer(&mut vel.layer2, &grads.layer2, cfg.momentum);
            vel.dense_w.mapv_inplace(|v| v * cfg.momentum);
            vel.dense_w += &grads.dense_w;
            vel.dense_b = vel.dense_b * cfg.momentum + grads.dense_b;
            step_layer(&mut model.layer1, &vel.layer1, lr);
            step_layer(&mut model.layer2, &vel.layer2, lr);
            model.dense_w.scaled_add(-lr, &vel.dense_w);
            model.dense_b -= lr * vel.dense_b;
        }
    }
    if cfg.weight_decay > 0.0 {
        // Decoupled decay, applied after the gradient step.
        let shrink = lr * cfg.weight_decay;
        decay_layer(&mut model.layer1, shrink);
        decay_layer(&mut model.layer2, shrink);
        model.dense_w.mapv_inplace(|v| v - shrink * v);
        model.dense_b -= shrink * model.dense_b;
    }
}

fn step_layer(layer: &mut GruLayerWeights, grads: &GruLayerWeights, lr: f64) {
    layer.w_r.scaled_add(-lr, &grads.w_r);
    layer.w_z.scaled_add(-lr, &grads.w_z);
    layer.w_n.scaled_add(-lr, &grads.w_n);
    layer.u_r.scaled_add(-lr, &grads.u_r);
    layer.u_z.scaled_add(-lr, &grads.u_z);
    layer.u_n.scaled_add(-lr, &grads.u_n);
    layer.b_r.scaled_add(-lr, &grads.b_r);
    layer.b_z.scaled_add(-lr, &grads.b_z);
    layer.b_n.scaled_add(-lr, &grads.b_n);
    layer.c_r.scaled_add(-lr, &grads.c_r);
    layer.c_z.scaled_add(-lr, &grads.c_z);
    layer.c_n.scaled_add(-lr, &grads.c_n);
}

fn momentum_layer(vel: &mut GruLayerWeights, grads: &GruLayerWeights, momentum: f64) {
    for (v, g) in [
        (&mut vel.w_r, &grads.w_r),
        (&mut vel.w_z, &grads.w_z),
        (&mut vel.w_n, &grads.w_n),
        (&mut vel.u_r, &grads.u_r),
        (&mut vel.u_z, &grads.u_z),
        (&mut vel.u_n, &grads.u_n),
    ] {
        v.mapv_inplace(|x| x * momentum);
        v.scaled_add(1.0, g);
    }
    for (v, g) in [
        (&mut vel.b_r, &grads.b_r),
        (&mut vel.b_z, &grads.b_z),
        (&mut vel.b_n, &grads.b_n),
        (&mut vel.c_r, &grads.c_r),
        (&mut vel.c_z, &grads.c_z),
        (&mut vel.c_n, &grads.c_n),
    ] {
        v.mapv_inplace(|x| x * momentum);
        v.scaled_add(1.0, g);
    }
}

fn decay_layer(layer: &mut GruLayerWeights, shrink: f64) {
    for m in [
        &mut layer.w_r,
        &mut layer.w_z,
        &mut layer.w_n,
        &mut layer.u_r,
        &mut layer.u_z,
        &mut layer.u_n,
    ] {
        m.mapv_inplace(|v| v - shrink * v);
    }
    for b in [
        &mut layer.b_r,
        &mut layer.b_z,
        &mut layer.b_n,
        &mut layer.c_r,
        &mut layer.c_z,
        &mut layer.c_n,
    ] {
        b.mapv_inplace(|v| v - shrink * v);
    }
}

/// Decay constants of the exponential moving averages exposed as input
/// channels by [`running_mean_task`]; one extra channel carries 1/(t+1).
pub const RUNNING_MEAN_TASK_DECAYS: [f64; 7] = [0.0, 0.8, 0.9, 0.95, 0.97, 0.99, 0.995];

/// Input width of [`running_mean_task`] sequences.
pub const RUNNING_MEAN_TASK_DIM: usize = RUNNING_MEAN_TASK_DECAYS.len() + 1;

/// Synthetic learnable-by-construction task: a driving signal is drawn
/// uniformly from [-2, 2] per frame and the target is the sigmoid of 1.7
/// times its running mean. The inputs are exponential moving averages of
/// the signal at several decays plus a 1/(t+1) time channel, so the target
/// is approximately readable from the inputs and a small head trains to low
/// error at the published learning rate. Used by tests and the acceptance
/// suite.
pub fn running_mean_task(
    n_sequences: usize,
    len_range: std::ops::RangeInclusive<usize>,
    seed: u64,
) -> Vec<TrainingSequence> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_sequences)
        .map(|_| {
            let len = rng.gen_range(len_range.clone());
            let mut features = Array2::zeros((len, RUNNING_MEAN_TASK_DIM));
            let mut targets = Vec::with_capacity(len);
            let mut ema = [0.0f64; RUNNING_MEAN_TASK_DECAYS.len()];
            let mut acc = 0.0f64;
            for t in 0..len {
                let v: f64 = rng.gen_range(-2.0..2.0);
                for (d, &lambda) in RUNNING_MEAN_TASK_DECAYS.iter().enumerate() {
                    ema[d] = lambda * ema[d] + (1.0 - lambda) * v;
                    features[(t, d)] = ema[d];
                }
                features[(t, RUNNING_MEAN_TASK_DECAYS.len())] = 1.0 / (t + 1) as f64;
                acc += v;
                let mean = acc / (t + 1) as f64;
                targets.push(1.0 / (1.0 + (-1.7 * mean).exp()));
            }
            TrainingSequence { features, targets }
        })
        .collect()
}

/// Plateau construction: a model whose dense head is zero always outputs
/// exactly 0.5; with every target equal to 0.5 all gradients vanish and the
/// validation loss never improves after the first epoch.
pub fn plateau_task(
    n_sequences: usize,
    len: usize,
    input_dim: usize,
    seed: u64,
) -> Vec<TrainingSequence> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_sequences)
        .map(|_| {
            let features = Array2::from_shape_fn((len, input_dim), |_| rng.gen_range(-1.0..1.0));
            TrainingSequence {
                features,
                targets: vec![0.5; len],
            }
        })
        .collect()
}
