//! JSON model files.
//!
//! ```json
//! {"version": 1, "charset": "abcdefghijklmnopqrstuvwxyz -",
//!  "layers": [{"rows": 128, "cols": 494, "weights": [...], "bias": [...]}]}
//! ```
//!
//! `weights` is row-major. The optional per-layer `activation` defaults to
//! `relu` for hidden layers and `identity` for the output layer. Numbers are
//! written in shortest round-trip form, so load(save(m)) is bit-exact.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Activation, CharSet, Layer, ModelParams};
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    charset: String,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    activation: Option<Activation>,
}

pub fn model_to_json(model: &ModelParams) -> String {
    let last = model.num_layers() - 1;
    let file = ModelFile {
        version: MODEL_FORMAT_VERSION,
        charset: CharSet::as_string(),
        layers: model
            .layers()
            .iter()
            .enumerate()
            .map(|(l, layer)| {
                let default = if l == last {
                    Activation::Identity
                } else {
                    Activation::Relu
                };
                LayerFile {
                    rows: layer.outputs(),
                    cols: layer.inputs(),
                    weights: layer.weights.iter().copied().collect(),
                    bias: layer.bias.to_vec(),
                    activation: (layer.activation != default).then_some(layer.activation),
                }
            })
            .collect(),
    };
    serde_json::to_string(&file).expect("model serialization cannot fail")
}

pub fn model_from_json(text: &str) -> Result<ModelParams> {
    let file: ModelFile = serde_json::from_str(text)?;
    if file.version != MODEL_FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "unsupported model version {}",
            file.version
        )));
    }
    if file.charset != CharSet::as_string() {
        return Err(Error::Parse(format!(
            "unexpected charset {:?}",
            file.charset
        )));
    }
    let last = file.layers.len().saturating_sub(1);
    let layers = file
        .layers
        .into_iter()
        .enumerate()
        .map(|(l, lf)| {
            let expected = lf.rows.checked_mul(lf.cols);
            if expected != Some(lf.weights.len()) {
                return Err(Error::DimensionMismatch(format!(
                    "layer {l}: {} weights for a {}x{} matrix",
                    lf.weights.len(),
                    lf.rows,
                    lf.cols
                )));
            }
            if lf.bias.len() != lf.rows {
                return Err(Error::DimensionMismatch(format!(
                    "layer {l}: {} bias entries for {} rows",
                    lf.bias.len(),
                    lf.rows
                )));
            }
            let activation = lf.activation.unwrap_or(if l == last {
                Activation::Identity
            } else {
                Activation::Relu
            });
            Ok(Layer {
                weights: Array2::from_shape_vec((lf.rows, lf.cols), lf.weights)
                    .expect("length checked above"),
                bias: Array1::from_vec(lf.bias),
                activation,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ModelParams::new(layers)
}

pub fn save_model(model: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_json(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelParams> {
    model_from_json(&fs::read_to_string(path)?)
}
