//! Epsilon-LRP for affine + ReLU networks.
//!
//! Relevance starts at the target logit and is pushed down one layer at a
//! time with
//!
//! ```text
//! R_u = sum_v  z_vu / ((1 + eps) * (sum_u' z_vu' + b_v)) * R_v,   z_vu = w_vu * x_u
//! ```
//!
//! where `x` are the traced post-activation inputs of each layer. With zero
//! biases every layer scales the total relevance by exactly `1 / (1 + eps)`.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::features::{FrameWindow, NUM_MFCC, WINDOW_ROWS};
use crate::model::{forward_trace, Activation, ModelParams, NUM_CLASSES};

pub const DEFAULT_EPSILON: f64 = 1e-4;

/// Denominators with `|sum z + b|` below this pass no relevance.
pub const LRP_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrpConfig {
    pub epsilon: f64,
    /// Added to every denominator. Always zero outside of mutation tests.
    #[doc(hidden)]
    pub denominator_shift: f64,
}

impl Default for LrpConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            denominator_shift: 0.0,
        }
    }
}

impl LrpConfig {
    pub fn with_epsilon(epsilon: f64) -> Result<Self> {
        let cfg = Self {
            epsilon,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be finite and >= 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Relevance vectors from the input (index 0) up to the output layer
/// (index L), where the output entry is the seeded one-hot logit.
pub fn lrp_layer_relevances(
    model: &ModelParams,
    window: &FrameWindow,
    target: usize,
    config: &LrpConfig,
) -> Result<Vec<Array1<f64>>> {
    config.validate()?;
    if target >= NUM_CLASSES {
        return Err(Error::IndexOutOfRange {
            index: target,
            limit: NUM_CLASSES,
        });
    }
    for (l, layer) in model.layers().iter().enumerate() {
        if !matches!(layer.activation, Activation::Relu | Activation::Identity) {
            return Err(Error::UnsupportedLayer {
                layer: l,
                activation: layer.activation.name().into(),
            });
        }
    }
    let trace = forward_trace(model, window)?;

    let mut relevance = Array1::zeros(NUM_CLASSES);
    relevance[target] = trace.logits[target];
    let mut out = vec![relevance.clone()];
    let scale = 1.0 + config.epsilon;
    for (l, layer) in model.layers().iter().enumerate().rev() {
        let input = trace.layer_input(l);
        let coef = Array1::from_shape_fn(layer.outputs(), |v| {
            let total = trace.pre_activations[l][v];
            if total.abs() < LRP_GUARD {
                0.0
            } else {
                relevance[v] / (scale * total + config.denominator_shift)
            }
        });
        relevance = layer.weights.t().dot(&coef) * input;
        out.push(relevance.clone());
    }
    out.reverse();
    Ok(out)
}

/// Input-layer relevance reshaped to 19 x 26.
pub fn compute_lrp(
    model: &ModelParams,
    window: &FrameWindow,
    target: usize,
    config: &LrpConfig,
) -> Result<Array2<f64>> {
    let input = lrp_layer_relevances(model, window, target, config)?.swap_remove(0);
    Ok(Array2::from_shape_vec((WINDOW_ROWS, NUM_MFCC), input.to_vec()).expect("input has window size"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::WINDOW_FEATURES;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn window(seed: u64) -> FrameWindow {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FrameWindow::from_flat(
            (0..WINDOW_FEATURES).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            0,
        )
        .unwrap()
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn single_linear_layer_redistributes_z() {
        let m = ModelParams::random(&[], 3);
        let w = window(1);
        let cfg = LrpConfig::with_epsilon(0.0).unwrap();
        let r = compute_lrp(&m, &w, 2, &cfg).unwrap();
        let weights = m.layers()[0].weights.row(2);
        for (p, (&rel, &x)) in r.iter().zip(w.as_flat()).enumerate() {
            let z = weights[p] * x;
            assert!((rel - z).abs() <= 1e-12 * (1.0 + z.abs()), "{p}: {rel} vs {z}");
        }
    }

    #[test]
    fn conservation_without_bias() {
        let m = ModelParams::random(&[64, 32], 8);
        let w = window(2);
        let logits = forward_trace(&m, &w).unwrap().logits;
        for c in [0, 13, 27] {
            let layers = lrp_layer_relevances(&m, &w, c, &LrpConfig::with_epsilon(0.0).unwrap()).unwrap();
            for r in &layers {
                assert!(rel_close(r.sum(), logits[c], 1e-9));
            }
        }
    }

    #[test]
    fn epsilon_absorbs_per_layer() {
        let m = ModelParams::random(&[64, 32], 9);
        let w = window(3);
        let eps = 1e-4;
        let layers = lrp_layer_relevances(&m, &w, 5, &LrpConfig::with_epsilon(eps).unwrap()).unwrap();
        for pair in layers.windows(2) {
            assert!(rel_close(pair[0].sum(), pair[1].sum() / (1.0 + eps), 1e-9));
        }
        let logit = forward_trace(&m, &w).unwrap().logits[5];
        assert!(rel_close(layers[0].sum(), logit / (1.0 + eps).powi(3), 1e-9));
    }

    #[test]
    fn vanishing_denominator_is_guarded() {
        // All-zero network: every pre-activation is zero.
        let m = ModelParams::zeros(&[8]);
        let r = compute_lrp(&m, &window(0), 0, &LrpConfig::default()).unwrap();
        assert!(r.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sigmoid_layer_is_unsupported() {
        let mut layers = ModelParams::random(&[4], 0).into_layers();
        layers[0].activation = Activation::Sigmoid;
        let m = ModelParams::new(layers).unwrap();
        assert!(matches!(
            compute_lrp(&m, &window(0), 0, &LrpConfig::default()).unwrap_err(),
            Error::UnsupportedLayer { layer: 0, .. }
        ));
    }

    #[test]
    fn rejects_negative_epsilon() {
        assert!(LrpConfig::with_epsilon(-1.0).is_err());
        assert!(LrpConfig::with_epsilon(f64::NAN).is_err());
    }
}
