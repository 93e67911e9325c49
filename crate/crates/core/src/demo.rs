//! Synthetic speech-like material for training and exercising a small
//! demonstration model without any external dataset.
//!
//! Each character of a phrase becomes a 160 ms segment: letters are a pair
//! of letter-specific partials with a slow amplitude envelope, spaces are
//! near-silence and hyphens are broadband noise.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{
    make_windows, AudioClip, FrameWindow, MfccExtractor, FRAME_LENGTH, FRAME_STRIDE, SAMPLE_RATE,
    WINDOW_FEATURES,
};
use crate::model::{cross_entropy, train_epoch, CharSet, ModelParams, DEFAULT_HIDDEN};

/// Samples per character segment (160 ms).
pub const SEGMENT_SAMPLES: usize = 2_560;

pub const TRAINING_PHRASES: [&str; 6] = [
    "the quick brown fox jumps over the lazy dog",
    "pack my box with five dozen liquor jugs",
    "sphinx of black quartz judge my vow",
    "how vexingly quick daft zebras jump",
    "well-known jackdaws love my big sphinx of quartz",
    "a mad boxer shot a quick gloved jab to the jaw of his dizzy opponent",
];

fn partials(letter: usize) -> (f64, f64) {
    (300.0 + 45.0 * letter as f64, 1_200.0 + 230.0 * ((letter * 7) % 26) as f64)
}

/// Audio for `text` plus the character index of every sample.
pub fn synth_utterance(text: &str, seed: u64) -> Result<(AudioClip, Vec<usize>)> {
    let symbols: Vec<usize> = text
        .chars()
        .map(|c| CharSet::index_of(c.to_ascii_lowercase()).ok_or_else(|| Error::InvalidConfig(format!("character {c:?} is not in the charset"))))
        .collect::<Result<_>>()?;
    if symbols.is_empty() {
        return Err(Error::EmptyInput("phrase is empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(symbols.len() * SEGMENT_SAMPLES);
    let mut labels = Vec::with_capacity(samples.capacity());
    let sr = f64::from(SAMPLE_RATE);
    for &c in &symbols {
        let gain = rng.gen_range(0.6..1.0);
        let phase: f64 = rng.gen_range(0.0..2.0 * PI);
        for n in 0..SEGMENT_SAMPLES {
            let t = n as f64 / sr;
            let envelope = (PI * n as f64 / SEGMENT_SAMPLES as f64).sin();
            let s = if CharSet::is_letter(c) {
                let (f1, f2) = partials(c);
                gain * envelope * (0.3 * (2.0 * PI * f1 * t + phase).sin() + 0.15 * (2.0 * PI * f2 * t).sin())
                    + rng.gen_range(-0.003..0.003)
            } else if c == CharSet::SPACE {
                rng.gen_range(-0.002..0.002)
            } else {
                gain * envelope * rng.gen_range(-0.2..0.2)
            };
            samples.push(s.clamp(-1.0, 1.0));
            labels.push(c);
        }
    }
    Ok((AudioClip::new(samples, SAMPLE_RATE)?, labels))
}

/// Label of each MFCC frame: the character under the frame's centre sample.
pub fn frame_labels(sample_labels: &[usize]) -> Vec<usize> {
    let frames = MfccExtractor::num_frames(sample_labels.len());
    (0..frames)
        .map(|i| sample_labels[i * FRAME_STRIDE + FRAME_LENGTH / 2])
        .collect()
}

/// Labelled windows of the training phrases.
pub fn training_set(seed: u64) -> Result<(Vec<FrameWindow>, Vec<usize>)> {
    let extractor = MfccExtractor::new();
    let mut windows = Vec::new();
    let mut labels = Vec::new();
    for (i, phrase) in TRAINING_PHRASES.iter().enumerate() {
        let (clip, sample_labels) = synth_utterance(phrase, seed.wrapping_add(i as u64))?;
        windows.extend(make_windows(&extractor.compute(&clip)?));
        labels.extend(frame_labels(&sample_labels));
    }
    Ok((windows, labels))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    pub epochs: usize,
    pub samples: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub accuracy: f64,
}

/// Trains a 494-128-128-28 model on standardised synthetic windows and folds
/// the standardisation into the first layer.
pub fn train_demo_model(seed: u64, epochs: usize, learning_rate: f64) -> Result<(ModelParams, TrainingReport)> {
    let (windows, labels) = training_set(seed)?;
    let n = windows.len() as f64;
    let mut mean = vec![0.0; WINDOW_FEATURES];
    for w in &windows {
        for (m, x) in mean.iter_mut().zip(w.as_flat()) {
            *m += x / n;
        }
    }
    let mut scale = vec![0.0; WINDOW_FEATURES];
    for w in &windows {
        for ((s, x), m) in scale.iter_mut().zip(w.as_flat()).zip(&mean) {
            *s += (x - m) * (x - m) / n;
        }
    }
    for s in &mut scale {
        *s = s.sqrt().max(1e-3);
    }
    let standardized: Vec<FrameWindow> = windows
        .iter()
        .map(|w| {
            let x = w
                .as_flat()
                .iter()
                .zip(&mean)
                .zip(&scale)
                .map(|((x, m), s)| (x - m) / s)
                .collect();
            FrameWindow::from_flat(x, w.center_index())
        })
        .collect::<Result<_>>()?;

    let mut model = ModelParams::random(&DEFAULT_HIDDEN, seed);
    let initial_loss = cross_entropy(&model, &standardized, &labels)?;
    for epoch in 0..epochs {
        model = train_epoch(&model, &standardized, &labels, learning_rate, seed.wrapping_add(epoch as u64))?.0;
    }
    let final_loss = cross_entropy(&model, &standardized, &labels)?;
    let folded = model.fold_input_standardization(&mean, &scale)?;

    let correct = windows
        .iter()
        .zip(&labels)
        .filter(|(w, &l)| {
            crate::model::forward_trace(&folded, w)
                .map(|t| t.argmax() == l)
                .unwrap_or(false)
        })
        .count();
    Ok((
        folded,
        TrainingReport {
            epochs,
            samples: windows.len(),
            initial_loss,
            final_loss,
            accuracy: correct as f64 / n,
        },
    ))
}
