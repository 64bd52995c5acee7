//! ONNX model runner backend.
//!
//! Expected graph contract: a single image input shaped `[1, 1, H, W]`
//! (float32, NCHW) and exactly two outputs, one of width 5 carrying class
//! probabilities or logits and one of width 1280 carrying the penultimate
//! embedding. Output order and names are free; widths identify the roles.

use super::{Backend, ClassifierError};
use crate::types::{Frame, FEATURE_DIM, NUM_CLASSES};
use std::path::Path;
use tract_onnx::prelude::*;

type RunnableModel = SimplePlan<TypedFact, Box<dyn TypedOp>, Graph<TypedFact, Box<dyn TypedOp>>>;

pub(crate) struct OnnxBackend {
    plan: RunnableModel,
    input_w: usize,
    input_h: usize,
    probs_output: usize,
    features_output: usize,
}

impl OnnxBackend {
    pub fn load(path: &Path) -> Result<OnnxBackend, ClassifierError> {
        if !path.exists() {
            return Err(ClassifierError::FileNotFound(path.display().to_string()));
        }
        let model = tract_onnx::onnx()
            .model_for_path(path)
            .map_err(|e| ClassifierError::UnsupportedFormat(format!("{path:?}: {e}")))?;
        let model = model
            .into_optimized()
            .map_err(|e| ClassifierError::UnsupportedFormat(format!("{path:?}: {e}")))?;

        if model.inputs.len() != 1 {
            return Err(ClassifierError::ShapeMismatch(format!(
                "expected 1 input, found {}",
                model.inputs.len()
            )));
        }
        let input_shape = concrete_shape(&model, model.inputs[0])?;
        let (input_h, input_w) = match input_shape.as_slice() {
            [1, 1, h, w] => (*h, *w),
            other => {
                return Err(ClassifierError::ShapeMismatch(format!(
                    "expected input [1, 1, H, W], found {other:?}"
                )))
            }
        };

        if model.outputs.len() != 2 {
            return Err(ClassifierError::ShapeMismatch(format!(
                "expected 2 outputs (classes and features), found {}",
                model.outputs.len()
            )));
        }
        let widths: Vec<usize> = model
            .outputs
            .clone()
            .iter()
            .map(|o| concrete_shape(&model, *o).map(|s| s.iter().product()))
            .collect::<Result<_, _>>()?;
        let (probs_output, features_output) = match (widths[0], widths[1]) {
            (NUM_CLASSES, FEATURE_DIM) => (0, 1),
            (FEATURE_DIM, NUM_CLASSES) => (1, 0),
            _ => {
                return Err(ClassifierError::ShapeMismatch(format!(
                    "expected output widths {NUM_CLASSES} and {FEATURE_DIM}, found {widths:?}"
                )))
            }
        };

        let plan = model
            .into_runnable()
            .map_err(|e| ClassifierError::UnsupportedFormat(format!("{path:?}: {e}")))?;
        Ok(OnnxBackend {
            plan,
            input_w,
            input_h,
            probs_output,
            features_output,
        })
    }
}

fn concrete_shape(model: &TypedModel, outlet: OutletId) -> Result<Vec<usize>, ClassifierError> {
    let fact = model
        .outlet_fact(outlet)
        .map_err(|e| ClassifierError::ShapeMismatch(e.to_string()))?;
    fact.shape.as_concrete().map(|s| s.to_vec()).ok_or_else(|| {
        ClassifierError::ShapeMismatch(format!("symbolic dimensions unsupported: {:?}", fact.shape))
    })
}

impl Backend for OnnxBackend {
    fn input_size(&self) -> (usize, usize) {
        (self.input_w, self.input_h)
    }

    fn run(&self, frame: &Frame) -> Result<(Vec<f64>, Vec<f64>), ClassifierError> {
        let arr = tract_ndarray::Array4::from_shape_fn(
            (1, 1, self.input_h, self.input_w),
            |(_, _, y, x)| frame.get(x, y),
        );
        let tensor: Tensor = arr.into();
        let outputs = self
            .plan
            .run(tvec!(tensor.into()))
            .map_err(|e| ClassifierError::InferenceFailure(e.to_string()))?;

        let extract = |idx: usize| -> Result<Vec<f64>, ClassifierError> {
            outputs[idx]
                .to_array_view::<f32>()
                .map(|v| v.iter().map(|&x| x as f64).collect())
                .map_err(|e| ClassifierError::InferenceFailure(e.to_string()))
        };
        Ok((extract(self.probs_output)?, extract(self.features_output)?))
    }
}
