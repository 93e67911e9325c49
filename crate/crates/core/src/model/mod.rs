//! Feed-forward character classifier over flattened 19 x 26 windows.

mod forward;
mod io;
mod train;

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::WINDOW_FEATURES;

pub use forward::{forward_trace, input_gradient, logit_gradient, logits, ForwardTrace};
pub use io::{load_model, model_from_json, model_to_json, save_model, MODEL_FORMAT_VERSION};
pub use train::{cross_entropy, train_epoch};

/// Number of output neurons.
pub const NUM_CLASSES: usize = 28;

/// Hidden layer widths of the default surrogate network.
pub const DEFAULT_HIDDEN: [usize; 2] = [128, 128];

const SYMBOLS: [char; NUM_CLASSES] = [
    'a', 'b', 'c', 'd', 'e', 'f', 'g', 'h', 'i', 'j', 'k', 'l', 'm', 'n', 'o', 'p', 'q', 'r',
    's', 't', 'u', 'v', 'w', 'x', 'y', 'z', ' ', '-',
];

/// The fixed output alphabet: `a`..`z`, space, hyphen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CharSet;

impl CharSet {
    pub const SPACE: usize = 26;
    pub const HYPHEN: usize = 27;

    pub fn symbols() -> &'static [char; NUM_CLASSES] {
        &SYMBOLS
    }

    pub fn symbol(index: usize) -> Option<char> {
        SYMBOLS.get(index).copied()
    }

    pub fn index_of(c: char) -> Option<usize> {
        SYMBOLS.iter().position(|&s| s == c)
    }

    /// True for the 26 letters, false for space and hyphen.
    pub fn is_letter(index: usize) -> bool {
        index < Self::SPACE
    }

    pub fn as_string() -> String {
        SYMBOLS.iter().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative with respect to the pre-activation; ReLU'(0) = 0.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
            Activation::Sigmoid => {
                let s = self.apply(z);
                s * (1.0 - s)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

/// Affine layer `y = act(W x + b)`; `weights` is `(outputs, inputs)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    layers: Vec<Layer>,
}

impl ModelParams {
    /// Validates that the layers chain from 494 inputs to 28 linear outputs.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let last = layers
            .last()
            .ok_or_else(|| Error::DimensionMismatch("model has no layers".into()))?;
        if layers[0].inputs() != WINDOW_FEATURES {
            return Err(Error::DimensionMismatch(format!(
                "first layer takes {} inputs, expected {WINDOW_FEATURES}",
                layers[0].inputs()
            )));
        }
        if last.outputs() != NUM_CLASSES {
            return Err(Error::DimensionMismatch(format!(
                "last layer has {} outputs, expected {NUM_CLASSES}",
                last.outputs()
            )));
        }
        if last.activation != Activation::Identity {
            return Err(Error::InvalidConfig(
                "output layer must be linear (identity activation)".into(),
            ));
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.outputs() {
                return Err(Error::DimensionMismatch(format!(
                    "layer {l}: {} bias entries for {} outputs",
                    layer.bias.len(),
                    layer.outputs()
                )));
            }
            if l > 0 && layer.inputs() != layers[l - 1].outputs() {
                return Err(Error::DimensionMismatch(format!(
                    "layer {l} takes {} inputs but layer {} produces {}",
                    layer.inputs(),
                    l - 1,
                    layers[l - 1].outputs()
                )));
            }
            if layer.weights.iter().chain(&layer.bias).any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!("layer {l} has non-finite parameters")));
            }
        }
        Ok(Self { layers })
    }

    /// He-initialised ReLU network `494 -> hidden... -> 28` with zero biases.
    pub fn random(hidden: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = Self::dims_for(hidden);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(l, d)| {
                let normal = Normal::new(0.0, (2.0 / d[0] as f64).sqrt()).unwrap();
                Layer {
                    weights: Array2::from_shape_simple_fn((d[1], d[0]), || normal.sample(&mut rng)),
                    bias: Array1::zeros(d[1]),
                    activation: if l + 2 == dims.len() {
                        Activation::Identity
                    } else {
                        Activation::Relu
                    },
                }
            })
            .collect();
        Self { layers }
    }

    /// All-zero parameters with the given hidden widths.
    pub fn zeros(hidden: &[usize]) -> Self {
        let dims = Self::dims_for(hidden);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(l, d)| Layer {
                weights: Array2::zeros((d[1], d[0])),
                bias: Array1::zeros(d[1]),
                activation: if l + 2 == dims.len() {
                    Activation::Identity
                } else {
                    Activation::Relu
                },
            })
            .collect();
        Self { layers }
    }

    fn dims_for(hidden: &[usize]) -> Vec<usize> {
        std::iter::once(WINDOW_FEATURES)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(NUM_CLASSES))
            .collect()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn into_layers(self) -> Vec<Layer> {
        self.layers
    }

    /// Copy with every bias set to zero.
    pub fn without_biases(&self) -> Self {
        let mut out = self.clone();
        for layer in &mut out.layers {
            layer.bias.fill(0.0);
        }
        out
    }

    /// Folds an input standardisation `(x - mean) / scale` into the first
    /// layer, so the returned model consumes raw features.
    pub fn fold_input_standardization(&self, mean: &[f64], scale: &[f64]) -> Result<Self> {
        if mean.len() != WINDOW_FEATURES || scale.len() != WINDOW_FEATURES {
            return Err(Error::DimensionMismatch(format!(
                "standardization vectors must have {WINDOW_FEATURES} entries"
            )));
        }
        if scale.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::InvalidConfig("scale entries must be positive".into()));
        }
        let mut out = self.clone();
        let first = &mut out.layers[0];
        let inv = Array1::from_iter(scale.iter().map(|s| 1.0 / s));
        first.weights *= &inv.view().insert_axis(Axis(0));
        first.bias = &first.bias - &first.weights.dot(&Array1::from_vec(mean.to_vec()));
        Ok(out)
    }
}
