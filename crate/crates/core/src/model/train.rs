use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::forward::softmax;
use super::{ModelParams, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::features::{FrameWindow, WINDOW_FEATURES};

const BATCH_SIZE: usize = 32;

fn stack(windows: &[FrameWindow], idx: &[usize]) -> Array2<f64> {
    let mut x = Array2::zeros((idx.len(), WINDOW_FEATURES));
    for (mut row, &i) in x.rows_mut().into_iter().zip(idx) {
        row.assign(&ndarray::ArrayView1::from(windows[i].as_flat()));
    }
    x
}

/// Batched forward pass returning pre-activations and activations per layer.
fn forward_batch(model: &ModelParams, x: &Array2<f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
    let mut pre = Vec::with_capacity(model.num_layers());
    let mut act: Vec<Array2<f64>> = Vec::with_capacity(model.num_layers());
    for layer in model.layers() {
        let input = act.last().unwrap_or(x);
        let z = input.dot(&layer.weights.t()) + &layer.bias;
        act.push(z.mapv(|v| layer.activation.apply(v)));
        pre.push(z);
    }
    (pre, act)
}

fn row_loss(logits: ndarray::ArrayView1<'_, f64>, label: usize) -> f64 {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let lse = max + logits.mapv(|v| (v - max).exp()).sum().ln();
    lse - logits[label]
}

/// Mean softmax cross-entropy of `model` over the labelled windows.
pub fn cross_entropy(model: &ModelParams, windows: &[FrameWindow], labels: &[usize]) -> Result<f64> {
    validate(windows, labels)?;
    let idx: Vec<usize> = (0..windows.len()).collect();
    let mut total = 0.0;
    for chunk in idx.chunks(256) {
        let (_, act) = forward_batch(model, &stack(windows, chunk));
        let logits = act.last().expect("model has layers");
        for (row, &i) in logits.rows().into_iter().zip(chunk) {
            total += row_loss(row, labels[i]);
        }
    }
    Ok(total / windows.len() as f64)
}

fn validate(windows: &[FrameWindow], labels: &[usize]) -> Result<()> {
    if windows.len() != labels.len() {
        return Err(Error::LengthMismatch {
            windows: windows.len(),
            labels: labels.len(),
        });
    }
    if windows.is_empty() {
        return Err(Error::EmptyInput("training set is empty"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= NUM_CLASSES) {
        return Err(Error::InvalidLabel(bad));
    }
    Ok(())
}

/// One epoch of minibatch SGD (batch 32, order shuffled by `seed`) on
/// softmax cross-entropy. Returns the updated model and the mean loss of the
/// model as it was before the epoch.
pub fn train_epoch(
    model: &ModelParams,
    windows: &[FrameWindow],
    labels: &[usize],
    learning_rate: f64,
    seed: u64,
) -> Result<(ModelParams, f64)> {
    validate(windows, labels)?;
    if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "learning rate must be finite and non-negative, got {learning_rate}"
        )));
    }
    let loss = cross_entropy(model, windows, labels)?;
    if learning_rate == 0.0 {
        return Ok((model.clone(), loss));
    }

    let mut order: Vec<usize> = (0..windows.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut layers = model.clone().into_layers();
    for batch in order.chunks(BATCH_SIZE) {
        let current = ModelParams { layers };
        let x = stack(windows, batch);
        let (pre, act) = forward_batch(&current, &x);
        layers = current.into_layers();

        let n = batch.len() as f64;
        let logits = act.last().expect("model has layers");
        let mut delta = Array2::zeros(logits.raw_dim());
        for ((mut d, row), &i) in delta.rows_mut().into_iter().zip(logits.rows()).zip(batch) {
            d.assign(&softmax(row));
            d[labels[i]] -= 1.0;
        }
        delta /= n;

        for l in (0..layers.len()).rev() {
            let input = if l == 0 { &x } else { &act[l - 1] };
            let grad_w = delta.t().dot(input);
            let grad_b: Array1<f64> = delta.sum_axis(Axis(0));
            if l > 0 {
                let below = layers[l - 1].activation;
                let mut back = delta.dot(&layers[l].weights);
                back.zip_mut_with(&pre[l - 1], |g, &z| *g *= below.derivative(z));
                delta = back;
            }
            layers[l].weights.scaled_add(-learning_rate, &grad_w);
            layers[l].bias.scaled_add(-learning_rate, &grad_b);
        }
    }
    Ok((ModelParams::new(layers)?, loss))
}
