use ndarray::{Array1, Array2, ArrayView1};

use super::{ModelParams, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::features::{FrameWindow, NUM_MFCC, WINDOW_FEATURES, WINDOW_ROWS};

/// Every intermediate vector of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// Flattened network input.
    pub input: Array1<f64>,
    /// `W x + b` for each layer.
    pub pre_activations: Vec<Array1<f64>>,
    /// Layer outputs after the nonlinearity; the last entry equals the logits.
    pub activations: Vec<Array1<f64>>,
    pub logits: Array1<f64>,
    pub probabilities: Array1<f64>,
}

impl ForwardTrace {
    /// Input to layer `l`: the network input for `l = 0`, else `activations[l - 1]`.
    pub fn layer_input(&self, l: usize) -> ArrayView1<'_, f64> {
        if l == 0 {
            self.input.view()
        } else {
            self.activations[l - 1].view()
        }
    }

    pub fn argmax(&self) -> usize {
        argmax(self.logits.view())
    }
}

pub(crate) fn argmax(v: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn softmax(logits: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let exp = logits.mapv(|z| (z - max).exp());
    let total = exp.sum();
    exp / total
}

fn check_input(x: &[f64]) -> Result<()> {
    if x.len() != WINDOW_FEATURES {
        return Err(Error::DimensionMismatch(format!(
            "model input has {} features, expected {WINDOW_FEATURES}",
            x.len()
        )));
    }
    Ok(())
}

pub(crate) fn check_target(target: usize) -> Result<()> {
    if target >= NUM_CLASSES {
        return Err(Error::IndexOutOfRange {
            index: target,
            limit: NUM_CLASSES,
        });
    }
    Ok(())
}

pub(crate) fn trace_flat(model: &ModelParams, x: &[f64]) -> Result<ForwardTrace> {
    check_input(x)?;
    let input = Array1::from_vec(x.to_vec());
    let mut pre_activations = Vec::with_capacity(model.num_layers());
    let mut activations: Vec<Array1<f64>> = Vec::with_capacity(model.num_layers());
    for layer in model.layers() {
        let prev = activations.last().unwrap_or(&input);
        let z = layer.weights.dot(prev) + &layer.bias;
        let a = z.mapv(|v| layer.activation.apply(v));
        pre_activations.push(z);
        activations.push(a);
    }
    let logits = activations.last().cloned().expect("model has layers");
    let probabilities = softmax(logits.view());
    Ok(ForwardTrace {
        input,
        pre_activations,
        activations,
        logits,
        probabilities,
    })
}

pub fn forward_trace(model: &ModelParams, window: &FrameWindow) -> Result<ForwardTrace> {
    trace_flat(model, window.as_flat())
}

/// Logits for a flattened input without keeping the trace.
pub fn logits(model: &ModelParams, x: &[f64]) -> Result<Vec<f64>> {
    check_input(x)?;
    let mut h = Array1::from_vec(x.to_vec());
    for layer in model.layers() {
        h = (layer.weights.dot(&h) + &layer.bias).mapv_into(|v| layer.activation.apply(v));
    }
    Ok(h.to_vec())
}

/// Gradient of logit `target` with respect to the flattened input.
pub fn logit_gradient(model: &ModelParams, x: &[f64], target: usize) -> Result<Vec<f64>> {
    check_target(target)?;
    let trace = trace_flat(model, x)?;
    let mut delta = Array1::zeros(NUM_CLASSES);
    delta[target] = 1.0;
    for (l, layer) in model.layers().iter().enumerate().rev() {
        // delta holds d logit / d pre_activation of layer l.
        if l + 1 < model.num_layers() {
            let pre = &trace.pre_activations[l];
            delta.zip_mut_with(pre, |d, &z| *d *= layer.activation.derivative(z));
        }
        delta = layer.weights.t().dot(&delta);
    }
    Ok(delta.to_vec())
}

/// `d logit_target / d x` reshaped to the 19 x 26 window grid.
pub fn input_gradient(model: &ModelParams, window: &FrameWindow, target: usize) -> Result<Array2<f64>> {
    let g = logit_gradient(model, window.as_flat(), target)?;
    Ok(Array2::from_shape_vec((WINDOW_ROWS, NUM_MFCC), g).expect("gradient has window size"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, Layer};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_window(seed: u64) -> FrameWindow {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FrameWindow::from_flat(
            (0..WINDOW_FEATURES).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            0,
        )
        .unwrap()
    }

    fn linear_model(seed: u64) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ModelParams::new(vec![Layer {
            weights: Array2::from_shape_simple_fn((NUM_CLASSES, WINDOW_FEATURES), || {
                rng.gen_range(-1.0..1.0)
            }),
            bias: Array1::from_shape_simple_fn(NUM_CLASSES, || rng.gen_range(-1.0..1.0)),
            activation: Activation::Identity,
        }])
        .unwrap()
    }

    #[test]
    fn zero_model_is_uniform() {
        let t = forward_trace(&ModelParams::zeros(&[128, 128]), &random_window(1)).unwrap();
        assert!(t.logits.iter().all(|&z| z == 0.0));
        for &p in &t.probabilities {
            assert!((p - 1.0 / 28.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_linear_layer_is_affine() {
        let m = linear_model(2);
        let w = random_window(3);
        let t = forward_trace(&m, &w).unwrap();
        let layer = &m.layers()[0];
        for c in 0..NUM_CLASSES {
            let want: f64 = layer
                .weights
                .row(c)
                .iter()
                .zip(w.as_flat())
                .map(|(a, b)| a * b)
                .sum::<f64>()
                + layer.bias[c];
            assert!((t.logits[c] - want).abs() < 1e-12);
        }
        let g = input_gradient(&m, &w, 5).unwrap();
        assert_eq!(g.as_slice().unwrap(), layer.weights.row(5).as_slice().unwrap());
    }

    #[test]
    fn trace_invariants() {
        let m = ModelParams::random(&[64, 32], 9);
        let t = forward_trace(&m, &random_window(4)).unwrap();
        assert_eq!(t.activations.len(), 3);
        for l in 0..2 {
            for (a, z) in t.activations[l].iter().zip(&t.pre_activations[l]) {
                assert_eq!(*a, z.max(0.0));
            }
        }
        assert_eq!(t.logits, t.pre_activations[2]);
        assert!((t.probabilities.sum() - 1.0).abs() < 1e-12);
        assert!(t.probabilities.iter().all(|&p| p >= 0.0));
        let shifted = softmax((&t.logits + 123.0).view());
        for (a, b) in shifted.iter().zip(&t.probabilities) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dead_relu_blocks_gradient() {
        // One hidden unit fed a negative pre-activation.
        let mut layers = ModelParams::zeros(&[1]).into_layers();
        layers[0].weights.fill(1.0);
        layers[0].bias[0] = -1e6;
        layers[1].weights.fill(1.0);
        let m = ModelParams::new(layers).unwrap();
        let w = random_window(5);
        let g = input_gradient(&m, &w, 0).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_target_and_input() {
        let m = ModelParams::random(&[4], 0);
        assert!(input_gradient(&m, &random_window(0), 28).is_err());
        assert!(matches!(
            logits(&m, &[0.0; 10]).unwrap_err(),
            Error::DimensionMismatch(_)
        ));
    }
}
