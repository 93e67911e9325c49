//! Seeded property suites checking the attribution engines against
//! independent oracles: central finite differences for gradients, relevance
//! conservation for LRP, and exhaustive enumeration for Shapley values.

use std::fmt;
use std::str::FromStr;

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attribution::{
    exact_shapley, lrp_layer_relevances, sample_shapley, Coalition, LrpConfig, ModelGame,
};
use crate::error::{Error, Result};
use crate::features::{FrameWindow, WINDOW_FEATURES};
use crate::model::{logit_gradient, logits, ModelParams, DEFAULT_HIDDEN, NUM_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Gradient,
    Lrp,
    Shapley,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::Gradient, Suite::Lrp, Suite::Shapley];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Gradient => "gradient",
            Suite::Lrp => "lrp",
            Suite::Shapley => "shapley",
        })
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradient" => Ok(Suite::Gradient),
            "lrp" => Ok(Suite::Lrp),
            "shapley" => Ok(Suite::Shapley),
            other => Err(Error::InvalidConfig(format!(
                "unknown suite {other:?} (expected gradient, lrp or shapley)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Mutation hook: added to every LRP denominator.
    pub lrp_denominator_shift: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 2024,
            lrp_denominator_shift: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub suite: Suite,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub const MODELS_PER_SUITE: usize = 20;
pub const GRADIENT_COORDINATES: usize = 50;
pub const FD_STEP: f64 = 1e-5;
pub const GRADIENT_REL_TOL: f64 = 1e-5;
pub const LRP_REL_TOL: f64 = 1e-9;
pub const SHAP_PERMUTATIONS: usize = 2000;
pub const SHAP_ACTIVE_FEATURES: usize = 10;
pub const SHAP_COVERAGE: f64 = 0.95;

fn random_input(rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..WINDOW_FEATURES).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn with_random_biases(model: ModelParams, rng: &mut ChaCha8Rng) -> ModelParams {
    let mut layers = model.into_layers();
    for layer in &mut layers {
        layer.bias = Array1::from_shape_simple_fn(layer.outputs(), || rng.gen_range(-0.1..0.1));
    }
    ModelParams::new(layers).expect("dimensions unchanged")
}

/// ReLU on/off pattern of every hidden unit.
pub fn activation_pattern(model: &ModelParams, x: &[f64]) -> Vec<bool> {
    let mut pattern = Vec::new();
    let mut h = Array1::from_vec(x.to_vec());
    for layer in model.layers() {
        let z = layer.weights.dot(&h) + &layer.bias;
        pattern.extend(z.iter().map(|&v| v > 0.0));
        h = z.mapv(|v| layer.activation.apply(v));
    }
    pattern
}

/// Central difference of logit `target` along coordinate `p`, or `None` when
/// the step crosses a ReLU kink and the difference quotient is meaningless.
pub fn central_difference(model: &ModelParams, x: &[f64], target: usize, p: usize, h: f64) -> Option<f64> {
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    plus[p] += h;
    minus[p] -= h;
    let base = activation_pattern(model, x);
    if activation_pattern(model, &plus) != base || activation_pattern(model, &minus) != base {
        return None;
    }
    let fp = logits(model, &plus).ok()?[target];
    let fm = logits(model, &minus).ok()?[target];
    Some((fp - fm) / (2.0 * h))
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn gradient_suite(opts: &VerifyOptions) -> Vec<PropertyOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut skipped = 0;
    for trial in 0..MODELS_PER_SUITE {
        let model = with_random_biases(ModelParams::random(&DEFAULT_HIDDEN, opts.seed + trial as u64), &mut rng);
        let x = random_input(&mut rng);
        let target = rng.gen_range(0..NUM_CLASSES);
        let grad = logit_gradient(&model, &x, target).expect("valid input");
        let mut done = 0;
        while done < GRADIENT_COORDINATES {
            let p = rng.gen_range(0..WINDOW_FEATURES);
            let Some(fd) = central_difference(&model, &x, target, p, FD_STEP) else {
                skipped += 1;
                continue;
            };
            done += 1;
            if grad[p].abs() > 1e-8 {
                worst = worst.max(rel_err(grad[p], fd));
                checked += 1;
            }
        }
    }
    vec![PropertyOutcome {
        suite: Suite::Gradient,
        name: "input gradient matches central finite differences",
        passed: worst < GRADIENT_REL_TOL,
        detail: format!(
            "{checked} coordinates over {MODELS_PER_SUITE} models, max rel err {worst:.3e} (tol {GRADIENT_REL_TOL:e}), {skipped} kink-crossing steps resampled"
        ),
    }]
}

fn lrp_suite(opts: &VerifyOptions) -> Vec<PropertyOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x1a7);
    let mut worst_conservation = 0.0f64;
    let mut worst_layerwise = 0.0f64;
    let mut worst_absorption = 0.0f64;
    for trial in 0..MODELS_PER_SUITE {
        let model = ModelParams::random(&DEFAULT_HIDDEN, opts.seed + 100 + trial as u64).without_biases();
        let window = FrameWindow::from_flat(random_input(&mut rng), 0).expect("window size");
        let target = rng.gen_range(0..NUM_CLASSES);
        let logit = logits(&model, window.as_flat()).expect("valid input")[target];

        let exact = LrpConfig {
            epsilon: 0.0,
            denominator_shift: opts.lrp_denominator_shift,
        };
        let layers = lrp_layer_relevances(&model, &window, target, &exact).expect("affine relu model");
        worst_conservation = worst_conservation.max(rel_err(layers[0].sum(), logit));
        for pair in layers.windows(2) {
            worst_layerwise = worst_layerwise.max(rel_err(pair[0].sum(), pair[1].sum()));
        }

        let eps = LrpConfig {
            epsilon: crate::attribution::DEFAULT_EPSILON,
            denominator_shift: opts.lrp_denominator_shift,
        };
        let layers = lrp_layer_relevances(&model, &window, target, &eps).expect("affine relu model");
        let want = logit / (1.0 + eps.epsilon).powi(model.num_layers() as i32);
        worst_absorption = worst_absorption.max(rel_err(layers[0].sum(), want));
    }
    vec![
        PropertyOutcome {
            suite: Suite::Lrp,
            name: "conservation: input relevance equals target logit (eps = 0, no bias)",
            passed: worst_conservation < LRP_REL_TOL,
            detail: format!("max rel err {worst_conservation:.3e} over {MODELS_PER_SUITE} models"),
        },
        PropertyOutcome {
            suite: Suite::Lrp,
            name: "conservation between consecutive layers (eps = 0, no bias)",
            passed: worst_layerwise < LRP_REL_TOL,
            detail: format!("max rel err {worst_layerwise:.3e}"),
        },
        PropertyOutcome {
            suite: Suite::Lrp,
            name: "eps absorption: total relevance equals logit / (1 + eps)^L",
            passed: worst_absorption < LRP_REL_TOL,
            detail: format!("max rel err {worst_absorption:.3e} at eps = 1e-4"),
        },
    ]
}

fn shapley_axioms() -> PropertyOutcome {
    let mut failures = Vec::new();

    let product = exact_shapley(2, |s| if s.len() == 2 { 1.0 } else { 0.0 }).expect("small");
    if product != [0.5, 0.5] {
        failures.push(format!("product game gave {product:?}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in 1..=10usize {
        let table: Vec<f64> = (0..1usize << n).map(|_| f64::from(rng.gen_range(-50i32..50))).collect();
        let dummy = n - 1;
        // v ignores the dummy player.
        let v = |s: Coalition| table[s.members().filter(|&p| p != dummy).map(|p| 1usize << p).sum::<usize>()];
        let phi = exact_shapley(n, v).expect("small");
        let total: f64 = phi.iter().sum();
        let gain = v(Coalition::full(n)) - v(Coalition::empty(n));
        if (total - gain).abs() > 1e-12 * gain.abs().max(1.0) {
            failures.push(format!("efficiency n={n}: {total} vs {gain}"));
        }
        if phi[dummy].abs() > 1e-12 {
            failures.push(format!("dummy n={n}: {}", phi[dummy]));
        }
        // Symmetric game: value depends only on coalition size.
        let sizes: Vec<f64> = (0..=n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let phi = exact_shapley(n, |s| sizes[s.len()]).expect("small");
        if phi.iter().any(|&p| (p - phi[0]).abs() > 1e-12) {
            failures.push(format!("symmetry n={n}: {phi:?}"));
        }
    }
    PropertyOutcome {
        suite: Suite::Shapley,
        name: "exact Shapley satisfies efficiency, symmetry and dummy axioms",
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            "product, symmetric and dummy games with F = 1..10".into()
        } else {
            failures.join("; ")
        },
    }
}

fn shapley_sampling(opts: &VerifyOptions) -> Vec<PropertyOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5ba);
    let mut within = 0;
    let mut total = 0;
    let mut worst_efficiency = 0.0f64;
    for trial in 0..MODELS_PER_SUITE {
        let model = with_random_biases(ModelParams::random(&[32, 32], opts.seed + 200 + trial as u64), &mut rng);
        let target = rng.gen_range(0..NUM_CLASSES);
        let background = random_input(&mut rng);
        let full = random_input(&mut rng);
        let mut active: Vec<usize> = Vec::new();
        while active.len() < SHAP_ACTIVE_FEATURES {
            let p = rng.gen_range(0..WINDOW_FEATURES);
            if !active.contains(&p) {
                active.push(p);
            }
        }
        let mut x = background.clone();
        for &p in &active {
            x[p] = full[p];
        }

        let game = ModelGame::new(&model, target).expect("valid target");
        let est = sample_shapley(&game, &x, &background, SHAP_PERMUTATIONS, opts.seed + trial as u64)
            .expect("valid game");
        let exact = exact_shapley(active.len(), |s| {
            let mut v = background.clone();
            for i in s.members() {
                v[active[i]] = x[active[i]];
            }
            logits(&model, &v).expect("valid input")[target]
        })
        .expect("small game");

        for (i, &p) in active.iter().enumerate() {
            total += 1;
            if (est.values[p] - exact[i]).abs() <= 3.0 * est.std_errors[p] + 1e-9 {
                within += 1;
            }
        }
        let fx = logits(&model, &x).expect("valid input")[target];
        let fb = logits(&model, &background).expect("valid input")[target];
        let sum: f64 = est.values.iter().sum();
        worst_efficiency = worst_efficiency.max((sum - (fx - fb)).abs());
    }
    let coverage = within as f64 / total as f64;
    vec![
        PropertyOutcome {
            suite: Suite::Shapley,
            name: "sampled Shapley within 3 standard errors of exact values",
            passed: coverage >= SHAP_COVERAGE,
            detail: format!(
                "{within}/{total} features ({:.1}%) over {MODELS_PER_SUITE} trials, M = {SHAP_PERMUTATIONS}",
                100.0 * coverage
            ),
        },
        PropertyOutcome {
            suite: Suite::Shapley,
            name: "sampled Shapley efficiency: sum equals f(x) - f(background)",
            passed: worst_efficiency < 1e-9,
            detail: format!("max abs deviation {worst_efficiency:.3e}"),
        },
    ]
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Vec<PropertyOutcome> {
    match suite {
        Suite::Gradient => gradient_suite(opts),
        Suite::Lrp => lrp_suite(opts),
        Suite::Shapley => {
            let mut out = vec![shapley_axioms()];
            out.extend(shapley_sampling(opts));
            out
        }
    }
}
