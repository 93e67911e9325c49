use ndarray::Array2;

use crate::error::Result;
use crate::features::FrameWindow;
use crate::model::{input_gradient, ModelParams};

/// `|d logit_target / d x|`, elementwise.
pub fn compute_saliency(model: &ModelParams, window: &FrameWindow, target: usize) -> Result<Array2<f64>> {
    Ok(input_gradient(model, window, target)?.mapv_into(f64::abs))
}
