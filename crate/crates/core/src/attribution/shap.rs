//! Monte-Carlo Shapley values by permutation sampling.
//!
//! Each sample draws a uniformly random feature order, starts from the
//! background input and switches features to their actual values one at a
//! time, crediting every feature with the change in the target logit it
//! caused. Averaging over orders gives an unbiased estimate of the classic
//! Shapley value, and every single order telescopes to f(x) - f(background).

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{FrameWindow, NUM_MFCC, WINDOW_FEATURES, WINDOW_ROWS};
use crate::model::{forward_trace, CharSet, ModelParams, NUM_CLASSES};

pub const DEFAULT_PERMUTATIONS: usize = 2000;

/// Replacement values for features outside a coalition.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundSample {
    values: Array2<f64>,
}

impl BackgroundSample {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.dim() != (WINDOW_ROWS, NUM_MFCC) {
            return Err(Error::DimensionMismatch(format!(
                "background must be {WINDOW_ROWS}x{NUM_MFCC}, got {:?}",
                values.dim()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("background has non-finite entries".into()));
        }
        Ok(Self {
            values: values.as_standard_layout().into_owned(),
        })
    }

    pub fn zeros() -> Self {
        Self {
            values: Array2::zeros((WINDOW_ROWS, NUM_MFCC)),
        }
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn as_flat(&self) -> &[f64] {
        self.values.as_slice().expect("standard layout")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapConfig {
    pub num_permutations: usize,
    pub seed: u64,
    pub background: BackgroundSample,
}

impl ShapConfig {
    pub fn new(num_permutations: usize, seed: u64, background: BackgroundSample) -> Result<Self> {
        if num_permutations == 0 {
            return Err(Error::InvalidConfig("number of permutations must be >= 1".into()));
        }
        Ok(Self {
            num_permutations,
            seed,
            background,
        })
    }

    /// Per-window stream: `seed xor window_index`.
    pub fn for_window(&self, window_index: usize) -> Self {
        Self {
            seed: self.seed ^ window_index as u64,
            ..self.clone()
        }
    }
}

/// Elementwise lower median over the given windows.
pub fn build_background<'a>(windows: impl IntoIterator<Item = &'a FrameWindow>) -> Result<BackgroundSample> {
    let windows: Vec<&FrameWindow> = windows.into_iter().collect();
    if windows.is_empty() {
        return Err(Error::EmptyInput("no windows to build a background from"));
    }
    let mut column = vec![0.0; windows.len()];
    let mut out = Vec::with_capacity(WINDOW_FEATURES);
    for p in 0..WINDOW_FEATURES {
        for (slot, w) in column.iter_mut().zip(&windows) {
            *slot = w.as_flat()[p];
        }
        column.sort_unstable_by(f64::total_cmp);
        out.push(column[(column.len() - 1) / 2]);
    }
    BackgroundSample::new(Array2::from_shape_vec((WINDOW_ROWS, NUM_MFCC), out).expect("window size"))
}

/// Windows whose predicted character is a letter (not space or hyphen).
pub fn letter_windows<'a>(model: &ModelParams, windows: &'a [FrameWindow]) -> Result<Vec<&'a FrameWindow>> {
    let mut out = Vec::new();
    for w in windows {
        if CharSet::is_letter(forward_trace(model, w)?.argmax()) {
            out.push(w);
        }
    }
    Ok(out)
}

/// A value function that can be updated one feature at a time.
pub trait CoalitionGame {
    type State: Clone;

    fn num_features(&self) -> usize;
    fn start(&self, x: &[f64]) -> Self::State;
    fn set_feature(&self, state: &mut Self::State, feature: usize, old: f64, new: f64);
    fn value(&self, state: &Self::State) -> f64;

    /// Game value after each `(feature, old, new)` switch of `path`, applied
    /// in order from `state`.
    fn trajectory(&self, mut state: Self::State, path: &[(usize, f64, f64)]) -> Vec<f64> {
        path.iter()
            .map(|&(p, old, new)| {
                self.set_feature(&mut state, p, old, new);
                self.value(&state)
            })
            .collect()
    }
}

/// Wraps an arbitrary function of the full feature vector.
pub struct FnGame<F> {
    num_features: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64> FnGame<F> {
    pub fn new(num_features: usize, f: F) -> Self {
        Self { num_features, f }
    }
}

impl<F: Fn(&[f64]) -> f64> CoalitionGame for FnGame<F> {
    type State = Vec<f64>;

    fn num_features(&self) -> usize {
        self.num_features
    }

    fn start(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn set_feature(&self, state: &mut Vec<f64>, feature: usize, _old: f64, new: f64) {
        state[feature] = new;
    }

    fn value(&self, state: &Vec<f64>) -> f64 {
        (self.f)(state)
    }
}

/// Target logit of a model, with the first-layer pre-activation updated
/// incrementally as features switch.
pub struct ModelGame<'a> {
    model: &'a ModelParams,
    target: usize,
    first_columns: Array2<f64>,
}

impl<'a> ModelGame<'a> {
    pub fn new(model: &'a ModelParams, target: usize) -> Result<Self> {
        if target >= NUM_CLASSES {
            return Err(Error::IndexOutOfRange {
                index: target,
                limit: NUM_CLASSES,
            });
        }
        let first_columns = model.layers()[0].weights.t().as_standard_layout().into_owned();
        Ok(Self {
            model,
            target,
            first_columns,
        })
    }
}

impl CoalitionGame for ModelGame<'_> {
    type State = Array1<f64>;

    fn num_features(&self) -> usize {
        WINDOW_FEATURES
    }

    fn start(&self, x: &[f64]) -> Array1<f64> {
        let first = &self.model.layers()[0];
        first.weights.dot(&ndarray::ArrayView1::from(x)) + &first.bias
    }

    fn set_feature(&self, state: &mut Array1<f64>, feature: usize, old: f64, new: f64) {
        state.scaled_add(new - old, &self.first_columns.row(feature));
    }

    fn value(&self, state: &Array1<f64>) -> f64 {
        let layers = self.model.layers();
        let last = layers.len() - 1;
        if last == 0 {
            return state[self.target];
        }
        let mut h = state.mapv(|z| layers[0].activation.apply(z));
        for layer in &layers[1..last] {
            h = (layer.weights.dot(&h) + &layer.bias).mapv_into(|z| layer.activation.apply(z));
        }
        let out = &layers[last];
        out.activation
            .apply(out.weights.row(self.target).dot(&h) + out.bias[self.target])
    }

    /// Stacks the first-layer states of the whole path and pushes them
    /// through the remaining layers as matrix products.
    fn trajectory(&self, state: Array1<f64>, path: &[(usize, f64, f64)]) -> Vec<f64> {
        let layers = self.model.layers();
        let last = layers.len() - 1;
        let mut z = Array2::zeros((path.len(), state.len()));
        let mut running = state;
        for (mut row, &(p, old, new)) in z.outer_iter_mut().zip(path) {
            self.set_feature(&mut running, p, old, new);
            row.assign(&running);
        }
        if last == 0 {
            return z.column(self.target).to_vec();
        }
        let mut h = z.mapv_into(|v| layers[0].activation.apply(v));
        for layer in &layers[1..last] {
            h = (h.dot(&layer.weights.t()) + &layer.bias).mapv_into(|v| layer.activation.apply(v));
        }
        let out = &layers[last];
        (h.dot(&out.weights.row(self.target)) + out.bias[self.target])
            .mapv_into(|v| out.activation.apply(v))
            .to_vec()
    }
}

/// Sample mean of the marginal contributions and its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapEstimate {
    pub values: Vec<f64>,
    /// Sample standard deviation over permutations divided by sqrt(M); zero for M = 1.
    pub std_errors: Vec<f64>,
    /// f(background).
    pub base_value: f64,
    /// f(x).
    pub full_value: f64,
}

/// Permutation-sampling Shapley estimate for `game` at `x` against `background`.
///
/// Features whose value equals the background never change the game, so
/// their contribution is exactly zero and only the remaining features are
/// shuffled; the relative order of a subset under a uniform permutation is
/// itself uniform.
pub fn sample_shapley<G: CoalitionGame>(
    game: &G,
    x: &[f64],
    background: &[f64],
    num_permutations: usize,
    seed: u64,
) -> Result<ShapEstimate> {
    let f = game.num_features();
    if x.len() != f || background.len() != f {
        return Err(Error::DimensionMismatch(format!(
            "game has {f} features, input {} and background {}",
            x.len(),
            background.len()
        )));
    }
    if num_permutations == 0 {
        return Err(Error::InvalidConfig("number of permutations must be >= 1".into()));
    }

    let base_state = game.start(background);
    let base_value = game.value(&base_state);
    let mut order: Vec<usize> = (0..f).filter(|&p| x[p] != background[p]).collect();

    let mut mean = vec![0.0; f];
    let mut m2 = vec![0.0; f];
    let mut full_value = base_value;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut path = Vec::with_capacity(order.len());
    for sample in 1..=num_permutations {
        order.shuffle(&mut rng);
        path.clear();
        path.extend(order.iter().map(|&p| (p, background[p], x[p])));
        let values = game.trajectory(base_state.clone(), &path);
        let mut prev = base_value;
        for (&p, &next) in order.iter().zip(&values) {
            let delta = next - prev;
            prev = next;
            let d = delta - mean[p];
            mean[p] += d / sample as f64;
            m2[p] += d * (delta - mean[p]);
        }
        full_value = prev;
    }

    let m = num_permutations as f64;
    let std_errors = m2
        .iter()
        .map(|&s| {
            if num_permutations > 1 {
                (s / (m - 1.0) / m).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    Ok(ShapEstimate {
        values: mean,
        std_errors,
        base_value,
        full_value,
    })
}

pub fn compute_shap_estimate(
    model: &ModelParams,
    window: &FrameWindow,
    target: usize,
    config: &ShapConfig,
) -> Result<ShapEstimate> {
    let game = ModelGame::new(model, target)?;
    sample_shapley(
        &game,
        window.as_flat(),
        config.background.as_flat(),
        config.num_permutations,
        config.seed,
    )
}

/// Sampled Shapley values of the target logit, reshaped to 19 x 26.
pub fn compute_shap(
    model: &ModelParams,
    window: &FrameWindow,
    target: usize,
    config: &ShapConfig,
) -> Result<Array2<f64>> {
    let est = compute_shap_estimate(model, window, target, config)?;
    Ok(Array2::from_shape_vec((WINDOW_ROWS, NUM_MFCC), est.values).expect("window size"))
}
