//! Recurrent quality predictor: two stacked GRU layers with inter-layer
//! dropout, a dense head and a sigmoid output, implemented from scratch in
//! f64 with exact backpropagation through time.

mod io;
mod train;

pub use io::{load_weights, save_weights, WEIGHTS_FORMAT_VERSION};
pub use train::{
    plateau_task, running_mean_task, train, EpochRecord, StopReason, TrainConfig, TrainHistory,
    TrainingSequence, RUNNING_MEAN_TASK_DECAYS, RUNNING_MEAN_TASK_DIM,
};

use crate::types::{FeatureVector, QualityScore, FEATURE_DIM};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GruError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty sequence")]
    EmptySequence,
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("weights file format error: {0}")]
    FormatVersionMismatch(String),
}

/// Whether dropout is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Inference,
    Training,
}

/// Weights of one GRU layer: per gate (reset, update, candidate) an
/// input-to-hidden matrix, a hidden-to-hidden matrix, an input-side bias and
/// a hidden-side bias. Matrices are `hidden x input` and `hidden x hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruLayerWeights {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_r: Array2<f64>,
    pub w_z: Array2<f64>,
    pub w_n: Array2<f64>,
    pub u_r: Array2<f64>,
    pub u_z: Array2<f64>,
    pub u_n: Array2<f64>,
    pub b_r: Array1<f64>,
    pub b_z: Array1<f64>,
    pub b_n: Array1<f64>,
    pub c_r: Array1<f64>,
    pub c_z: Array1<f64>,
    pub c_n: Array1<f64>,
}

impl GruLayerWeights {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> GruLayerWeights {
        GruLayerWeights {
            input_dim,
            hidden_dim,
            w_r: Array2::zeros((hidden_dim, input_dim)),
            w_z: Array2::zeros((hidden_dim, input_dim)),
            w_n: Array2::zeros((hidden_dim, input_dim)),
            u_r: Array2::zeros((hidden_dim, hidden_dim)),
            u_z: Array2::zeros((hidden_dim, hidden_dim)),
            u_n: Array2::zeros((hidden_dim, hidden_dim)),
            b_r: Array1::zeros(hidden_dim),
            b_z: Array1::zeros(hidden_dim),
            b_n: Array1::zeros(hidden_dim),
            c_r: Array1::zeros(hidden_dim),
            c_z: Array1::zeros(hidden_dim),
            c_n: Array1::zeros(hidden_dim),
        }
    }

    fn seeded(input_dim: usize, hidden_dim: usize, rng: &mut ChaCha8Rng) -> GruLayerWeights {
        // Uniform +-1/sqrt(hidden), the usual fan-based scheme.
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        fn mat(rng: &mut ChaCha8Rng, r: usize, c: usize, bound: f64) -> Array2<f64> {
            Array2::from_shape_fn((r, c), |_| rng.gen_range(-bound..bound))
        }
        fn vec1(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Array1<f64> {
            Array1::from_shape_fn(n, |_| rng.gen_range(-bound..bound))
        }
        GruLayerWeights {
            input_dim,
            hidden_dim,
            w_r: mat(rng, hidden_dim, input_dim, bound),
            w_z: mat(rng, hidden_dim, input_dim, bound),
            w_n: mat(rng, hidden_dim, input_dim, bound),
            u_r: mat(rng, hidden_dim, hidden_dim, bound),
            u_z: mat(rng, hidden_dim, hidden_dim, bound),
            u_n: mat(rng, hidden_dim, hidden_dim, bound),
            b_r: vec1(rng, hidden_dim, bound),
            b_z: vec1(rng, hidden_dim, bound),
            b_n: vec1(rng, hidden_dim, bound),
            c_r: vec1(rng, hidden_dim, bound),
            c_z: vec1(rng, hidden_dim, bound),
            c_n: vec1(rng, hidden_dim, bound),
        }
    }

    fn check_shapes(&self) -> Result<(), GruError> {
        let (h, i) = (self.hidden_dim, self.input_dim);
        let ok = self.w_r.dim() == (h, i)
            && self.w_z.dim() == (h, i)
            && self.w_n.dim() == (h, i)
            && self.u_r.dim() == (h, h)
            && self.u_z.dim() == (h, h)
            && self.u_n.dim() == (h, h)
            && [
                &self.b_r, &self.b_z, &self.b_n, &self.c_r, &self.c_z, &self.c_n,
            ]
            .iter()
            .all(|b| b.len() == h);
        if ok {
            Ok(())
        } else {
            Err(GruError::ShapeMismatch(format!(
                "layer weights inconsistent with dims {h}x{i}"
            )))
        }
    }
}

/// Default hidden width. The choice is free; 128 balances capacity against
/// CPU training time.
pub const DEFAULT_HIDDEN_DIM: usize = 128;

/// Inter-layer dropout rates.
pub const DROPOUT_AFTER_LAYER1: f64 = 0.1;
pub const DROPOUT_AFTER_LAYER2: f64 = 0.2;

/// The full quality head: GRU (1280 -> H), dropout 0.1, GRU (H -> H),
/// dropout 0.2, dense (H -> 1), sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct GruHeadModel {
    pub layer1: GruLayerWeights,
    pub layer2: GruLayerWeights,
    pub dense_w: Array1<f64>,
    pub dense_b: f64,
    pub dropout1: f64,
    pub dropout2: f64,
}

impl GruHeadModel {
    /// Standard model over 1280-dim classifier features, seeded random init.
    pub fn new(hidden_dim: usize, seed: u64) -> GruHeadModel {
        Self::with_dims(FEATURE_DIM, hidden_dim, seed)
    }

    /// Model with a custom input width (used by small-scale tests and
    /// experiments). Dropout rates keep their standard values.
    pub fn with_dims(input_dim: usize, hidden_dim: usize, seed: u64) -> GruHeadModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        let layer1 = GruLayerWeights::seeded(input_dim, hidden_dim, &mut rng);
        let layer2 = GruLayerWeights::seeded(hidden_dim, hidden_dim, &mut rng);
        let dense_w = Array1::from_shape_fn(hidden_dim, |_| rng.gen_range(-bound..bound));
        let dense_b = rng.gen_range(-bound..bound);
        GruHeadModel {
            layer1,
            layer2,
            dense_w,
            dense_b,
            dropout1: DROPOUT_AFTER_LAYER1,
            dropout2: DROPOUT_AFTER_LAYER2,
        }
    }

    /// All-zero model; outputs sigmoid(0) = 0.5 everywhere.
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> GruHeadModel {
        GruHeadModel {
            layer1: GruLayerWeights::zeros(input_dim, hidden_dim),
            layer2: GruLayerWeights::zeros(hidden_dim, hidden_dim),
            dense_w: Array1::zeros(hidden_dim),
            dense_b: 0.0,
            dropout1: DROPOUT_AFTER_LAYER1,
            dropout2: DROPOUT_AFTER_LAYER2,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layer1.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.layer2.hidden_dim
    }

    pub fn validate(&self) -> Result<(), GruError> {
        self.layer1.check_shapes()?;
        self.layer2.check_shapes()?;
        if self.layer2.input_dim != self.layer1.hidden_dim {
            return Err(GruError::ShapeMismatch(format!(
                "layer2 input {} != layer1 hidden {}",
                self.layer2.input_dim, self.layer1.hidden_dim
            )));
        }
        if self.dense_w.len() != self.layer2.hidden_dim {
            return Err(GruError::ShapeMismatch(format!(
                "dense width {} != layer2 hidden {}",
                self.dense_w.len(),
                self.layer2.hidden_dim
            )));
        }
        if !(0.0..1.0).contains(&self.dropout1) || !(0.0..1.0).contains(&self.dropout2) {
            return Err(GruError::ShapeMismatch(format!(
                "dropout rates ({}, {}) outside [0, 1)",
                self.dropout1, self.dropout2
            )));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One GRU cell update: reset and update gates through the logistic sigmoid,
/// a tanh candidate with the reset-scaled hidden term, then the convex
/// combination `h' = (1 - z) * n + z * h`.
pub fn gru_cell_step(x: &[f64], h: &[f64], w: &GruLayerWeights) -> Result<Vec<f64>, GruError> {
    if x.len() != w.input_dim || h.len() != w.hidden_dim {
        return Err(GruError::ShapeMismatch(format!(
            "inputs {}x{} do not match layer dims {}x{}",
            h.len(),
            x.len(),
            w.hidden_dim,
            w.input_dim
        )));
    }
    let x = ArrayView1::from(x);
    let h = ArrayView1::from(h);
    let cache = cell_forward(&x, &h, w);
    Ok(cache.h_new.to_vec())
}

struct CellCache {
    r: Array1<f64>,
    z: Array1<f64>,
    n: Array1<f64>,
    /// `U_n h + c_n`, needed for the reset-gate gradient.
    hn: Array1<f64>,
    h_prev: Array1<f64>,
    h_new: Array1<f64>,
}

fn cell_forward(x: &ArrayView1<f64>, h: &ArrayView1<f64>, w: &GruLayerWeights) -> CellCache {
    let r = (w.w_r.dot(x) + &w.b_r + w.u_r.dot(h) + &w.c_r).mapv(sigmoid);
    let z = (w.w_z.dot(x) + &w.b_z + w.u_z.dot(h) + &w.c_z).mapv(sigmoid);
    let hn = w.u_n.dot(h) + &w.c_n;
    let n = (w.w_n.dot(x) + &w.b_n + &r * &hn).mapv(f64::tanh);
    let h_new = (1.0 - &z) * &n + &z * h;
    CellCache {
        r,
        z,
        n,
        hn,
        h_prev: h.to_owned(),
        h_new,
    }
}

struct LayerRun {
    caches: Vec<CellCache>,
    /// Hidden state sequence, one row per timestep.
    outputs: Array2<f64>,
}

fn layer_forward(xs: &ArrayView2<f64>, w: &GruLayerWeights) -> LayerRun {
    let steps = xs.nrows();
    let mut h = Array1::zeros(w.hidden_dim);
    let mut caches = Vec::with_capacity(steps);
    let mut outputs = Array2::zeros((steps, w.hidden_dim));
    for t in 0..steps {
        let cache = cell_forward(&xs.row(t), &h.view(), w);
        h = cache.h_new.clone();
        outputs.row_mut(t).assign(&h);
        caches.push(cache);
    }
    LayerRun { caches, outputs }
}

/// Inverted dropout mask: entries are 0 with probability `rate`, otherwise
/// `1/(1 - rate)`, so inference needs no rescaling.
fn dropout_mask(shape: (usize, usize), rate: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    if rate == 0.0 {
        return Array2::ones(shape);
    }
    let keep = 1.0 - rate;
    Array2::from_shape_fn(shape, |_| {
        if rng.gen::<f64>() < keep {
            1.0 / keep
        } else {
            0.0
        }
    })
}

struct ForwardCache {
    layer1: LayerRun,
    layer2: LayerRun,
    mask1: Array2<f64>,
    mask2: Array2<f64>,
    /// Layer-1 outputs after dropout (layer-2 inputs).
    dropped1: Array2<f64>,
    /// Layer-2 outputs after dropout (dense inputs).
    dropped2: Array2<f64>,
    outputs: Vec<f64>,
}

fn run_forward(
    model: &GruHeadModel,
    xs: &ArrayView2<f64>,
    mode: Mode,
    seed: u64,
) -> Result<ForwardCache, GruError> {
    if xs.nrows() == 0 {
        return Err(GruError::EmptySequence);
    }
    if xs.ncols() != model.input_dim() {
        return Err(GruError::ShapeMismatch(format!(
            "sequence width {} != model input {}",
            xs.ncols(),
            model.input_dim()
        )));
    }
    model.validate()?;

    let steps = xs.nrows();
    let h = model.hidden_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mask1, mask2) = match mode {
        Mode::Inference => (Array2::ones((steps, h)), Array2::ones((steps, h))),
        Mode::Training => (
            dropout_mask((steps, h), model.dropout1, &mut rng),
            dropout_mask((steps, h), model.dropout2, &mut rng),
        ),
    };

    let layer1 = layer_forward(xs, &model.layer1);
    let dropped1 = &layer1.outputs * &mask1;
    let layer2 = layer_forward(&dropped1.view(), &model.layer2);
    let dropped2 = &layer2.outputs * &mask2;
    let outputs = dropped2
        .axis_iter(Axis(0))
        .map(|row| sigmoid(row.dot(&model.dense_w) + model.dense_b))
        .collect();
    Ok(ForwardCache {
        layer1,
        layer2,
        mask1,
        mask2,
        dropped1,
        dropped2,
        outputs,
    })
}

/// Forward pass over raw f64 rows (one row per frame). Causal and, in
/// inference mode, deterministic; outputs are strictly inside (0, 1).
pub fn forward_values(
    model: &GruHeadModel,
    xs: &ArrayView2<f64>,
    mode: Mode,
    seed: u64,
) -> Result<Vec<f64>, GruError> {
    Ok(run_forward(model, xs, mode, seed)?.outputs)
}

/// Forward pass over classifier feature vectors.
pub fn forward(
    model: &GruHeadModel,
    seq: &[FeatureVector],
    mode: Mode,
    seed: u64,
) -> Result<Vec<QualityScore>, GruError> {
    if seq.is_empty() {
        return Err(GruError::EmptySequence);
    }
    let xs = features_to_matrix(seq);
    let outputs = forward_values(model, &xs.view(), mode, seed)?;
    Ok(outputs
        .into_iter()
        .map(|y| QualityScore::new(y).expect("sigmoid output is in (0, 1)"))
        .collect())
}

pub(crate) fn features_to_matrix(seq: &[FeatureVector]) -> Array2<f64> {
    let dim = seq[0].values().len();
    let mut xs = Array2::zeros((seq.len(), dim));
    for (t, f) in seq.iter().enumerate() {
        xs.row_mut(t).assign(&ArrayView1::from(f.values()));
    }
    xs
}

/// Mean squared error over the frame axis.
pub fn loss(pred: &[f64], target: &[f64]) -> Result<f64, GruError> {
    if pred.len() != target.len() {
        return Err(GruError::LengthMismatch(format!(
            "{} predictions vs {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(GruError::EmptySequence);
    }
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}

/// Gradients for every parameter of a [`GruHeadModel`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layer1: GruLayerWeights,
    pub layer2: GruLayerWeights,
    pub dense_w: Array1<f64>,
    pub dense_b: f64,
}

impl Gradients {
    fn zeros(model: &GruHeadModel) -> Gradients {
        Gradients {
            layer1: GruLayerWeights::zeros(model.layer1.input_dim, model.layer1.hidden_dim),
            layer2: GruLayerWeights::zeros(model.layer2.input_dim, model.layer2.hidden_dim),
            dense_w: Array1::zeros(model.dense_w.len()),
            dense_b: 0.0,
        }
    }
}

struct LayerGradResult {
    grads: GruLayerWeights,
    /// Gradient with respect to the layer's inputs, one row per timestep.
    dxs: Array2<f64>,
}

/// BPTT through one layer. `d_external` holds, per timestep, the loss
/// gradient arriving at that timestep's hidden output from the layers above.
fn layer_backward(
    w: &GruLayerWeights,
    xs: &ArrayView2<f64>,
    run: &LayerRun,
    d_external: &Array2<f64>,
) -> LayerGradResult {
    let steps = xs.nrows();
    let mut grads = GruLayerWeights::zeros(w.input_dim, w.hidden_dim);
    let mut dxs = Array2::zeros((steps, w.input_dim));
    let mut carry: Array1<f64> = Array1::zeros(w.hidden_dim);

    for t in (0..steps).rev() {
        let cache = &run.caches[t];
        let dh = &carry + &d_external.row(t);

        let dz = &dh * &(&cache.h_prev - &cache.n) * &cache.z * (1.0 - &cache.z);
        let dn = &dh * (1.0 - &cache.z) * (1.0 - &cache.n * &cache.n);
        let dr = &dn * &cache.hn * &cache.r * (1.0 - &cache.r);
        let dnr = &dn * &cache.r;

        let x = xs.row(t);
        let h_prev = cache.h_prev.view();
        accumulate_outer(&mut grads.w_n, &dn.view(), &x);
        accumulate_outer(&mut grads.w_z, &dz.view(), &x);
        accumulate_outer(&mut grads.w_r, &dr.view(), &x);
        accumulate_outer(&mut grads.u_n, &dnr.view(), &h_prev);
        accumulate_outer(&mut grads.u_z, &dz.view(), &h_prev);
        accumulate_outer(&mut grads.u_r, &dr.view(), &h_prev);
        grads.b_n += &dn;
        grads.b_z += &dz;
        grads.b_r += &dr;
        grads.c_n += &dnr;
        grads.c_z += &dz;
        grads.c_r += &dr;

        let dx = w.w_z.t().dot(&dz) + w.w_r.t().dot(&dr) + w.w_n.t().dot(&dn);
        dxs.row_mut(t).assign(&dx);

        carry = &dh * &cache.z + w.u_z.t().dot(&dz) + w.u_r.t().dot(&dr) + w.u_n.t().dot(&dnr);
    }
    LayerGradResult { grads, dxs }
}

fn accumulate_outer(acc: &mut Array2<f64>, col: &ArrayView1<f64>, row: &ArrayView1<f64>) {
    for (i, &c) in col.iter().enumerate() {
        if c != 0.0 {
            let mut acc_row = acc.row_mut(i);
            acc_row.scaled_add(c, row);
        }
    }
}

/// Exact gradients of the MSE loss through the whole head, including the
/// dropout masks fixed by `seed` (training mode).
pub fn backward(
    model: &GruHeadModel,
    xs: &ArrayView2<f64>,
    target: &[f64],
    seed: u64,
) -> Result<(Gradients, f64), GruError> {
    let cache = run_forward(model, xs, Mode::Training, seed)?;
    if target.len() != cache.outputs.len() {
        return Err(GruError::LengthMismatch(format!(
            "{} targets vs {} frames",
            target.len(),
            cache.outputs.len()
        )));
    }
    let steps = xs.nrows();
    let n = steps as f64;
    let loss_value = loss(&cache.outputs, target)?;

    let mut grads = Gradients::zeros(model);
    // Through the sigmoid dense head.
    let mut d_dropped2 = Array2::zeros((steps, model.hidden_dim()));
    for (t, (&y, &target_t)) in cache.outputs.iter().zip(target).enumerate() {
        let ds = 2.0 * (y - target_t) / n * y * (1.0 - y);
        grads.dense_w.scaled_add(ds, &cache.dropped2.row(t));
        grads.dense_b += ds;
        d_dropped2.row_mut(t).scaled_add(ds, &model.dense_w.view());
    }

    let d_h2 = &d_dropped2 * &cache.mask2;
    let l2 = layer_backward(&model.layer2, &cache.dropped1.view(), &cache.layer2, &d_h2);
    grads.layer2 = l2.grads;

    let d_h1 = &l2.dxs * &cache.mask1;
    let l1 = layer_backward(&model.layer1, xs, &cache.layer1, &d_h1);
    grads.layer1 = l1.grads;

    Ok((grads, loss_value))
}
