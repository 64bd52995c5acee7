//! Weight persistence.
//!
//! The file is a JSON document: `format_version`, the dims and dropout
//! rates, then flat row-major f64 arrays per parameter tensor. JSON f64
//! serialization round-trips bit-exactly, so save followed by load
//! reproduces the model field for field.

use super::{GruError, GruHeadModel, GruLayerWeights};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const WEIGHTS_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LayerFile {
    input_dim: usize,
    hidden_dim: usize,
    w_r: Vec<f64>,
    w_z: Vec<f64>,
    w_n: Vec<f64>,
    u_r: Vec<f64>,
    u_z: Vec<f64>,
    u_n: Vec<f64>,
    b_r: Vec<f64>,
    b_z: Vec<f64>,
    b_n: Vec<f64>,
    c_r: Vec<f64>,
    c_z: Vec<f64>,
    c_n: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct WeightsFile {
    format_version: u32,
    input_dim: usize,
    hidden_dim: usize,
    dropout1: f64,
    dropout2: f64,
    layer1: LayerFile,
    layer2: LayerFile,
    dense_w: Vec<f64>,
    dense_b: f64,
}

fn layer_to_file(layer: &GruLayerWeights) -> LayerFile {
    let flat2 = |m: &Array2<f64>| m.iter().cloned().collect();
    let flat1 = |v: &Array1<f64>| v.to_vec();
    LayerFile {
        input_dim: layer.input_dim,
        hidden_dim: layer.hidden_dim,
        w_r: flat2(&layer.w_r),
        w_z: flat2(&layer.w_z),
        w_n: flat2(&layer.w_n),
        u_r: flat2(&layer.u_r),
        u_z: flat2(&layer.u_z),
        u_n: flat2(&layer.u_n),
        b_r: flat1(&layer.b_r),
        b_z: flat1(&layer.b_z),
        b_n: flat1(&layer.b_n),
        c_r: flat1(&layer.c_r),
        c_z: flat1(&layer.c_z),
        c_n: flat1(&layer.c_n),
    }
}

fn layer_from_file(file: LayerFile) -> Result<GruLayerWeights, GruError> {
    let (h, i) = (file.hidden_dim, file.input_dim);
    let mat = |flat: Vec<f64>, rows: usize, cols: usize, name: &str| {
        Array2::from_shape_vec((rows, cols), flat).map_err(|_| {
            GruError::ShapeMismatch(format!("{name} does not hold {rows}x{cols} values"))
        })
    };
    let vec1 = |flat: Vec<f64>, len: usize, name: &str| {
        if flat.len() == len {
            Ok(Array1::from_vec(flat))
        } else {
            Err(GruError::ShapeMismatch(format!(
                "{name} has {} values, expected {len}",
                flat.len()
            )))
        }
    };
    Ok(GruLayerWeights {
        input_dim: i,
        hidden_dim: h,
        w_r: mat(file.w_r, h, i, "w_r")?,
        w_z: mat(file.w_z, h, i, "w_z")?,
        w_n: mat(file.w_n, h, i, "w_n")?,
        u_r: mat(file.u_r, h, h, "u_r")?,
        u_z: mat(file.u_z, h, h, "u_z")?,
        u_n: mat(file.u_n, h, h, "u_n")?,
        b_r: vec1(file.b_r, h, "b_r")?,
        b_z: vec1(file.b_z, h, "b_z")?,
        b_n: vec1(file.b_n, h, "b_n")?,
        c_r: vec1(file.c_r, h, "c_r")?,
        c_z: vec1(file.c_z, h, "c_z")?,
        c_n: vec1(file.c_n, h, "c_n")?,
    })
}

pub fn save_weights(model: &GruHeadModel, path: &Path) -> Result<(), GruError> {
    model.validate()?;
    let file = WeightsFile {
        format_version: WEIGHTS_FORMAT_VERSION,
        input_dim: model.input_dim(),
        hidden_dim: model.hidden_dim(),
        dropout1: model.dropout1,
        dropout2: model.dropout2,
        layer1: layer_to_file(&model.layer1),
        layer2: layer_to_file(&model.layer2),
        dense_w: model.dense_w.to_vec(),
        dense_b: model.dense_b,
    };
    let text =
        serde_json::to_string(&file).map_err(|e| GruError::FormatVersionMismatch(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<GruHeadModel, GruError> {
    let text = fs::read_to_string(path)?;
    let file: WeightsFile = serde_json::from_str(&text).map_err(|e| {
        GruError::FormatVersionMismatch(format!("unreadable weights file {path:?}: {e}"))
    })?;
    if file.format_version != WEIGHTS_FORMAT_VERSION {
        return Err(GruError::FormatVersionMismatch(format!(
            "format version {} unsupported (expected {WEIGHTS_FORMAT_VERSION})",
            file.format_version
        )));
    }
    if file.layer1.input_dim != file.input_dim
        || file.layer1.hidden_dim != file.hidden_dim
        || file.layer2.hidden_dim != file.hidden_dim
    {
        return Err(GruError::ShapeMismatch(
            "header dims disagree with layer dims".into(),
        ));
    }
    let model = GruHeadModel {
        layer1: layer_from_file(file.layer1)?,
        layer2: layer_from_file(file.layer2)?,
        dense_w: Array1::from_vec(file.dense_w),
        dense_b: file.dense_b,
        dropout1: file.dropout1,
        dropout2: file.dropout2,
    };
    model.validate()?;
    Ok(model)
}
