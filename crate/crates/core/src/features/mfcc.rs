//! MFCC front end.
//!
//! Pipeline: pre-emphasis, 512-sample Hann-windowed frames every 320 samples
//! (32 ms / 20 ms at 16 kHz), power spectrum, 40 triangular HTK-mel filters
//! spanning 0 Hz to 8 kHz, natural log with an additive floor, orthonormal
//! DCT-II, first 26 coefficients.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::wav::{AudioClip, SAMPLE_RATE};
use crate::error::{Error, Result};

pub const NUM_MFCC: usize = 26;
pub const FRAME_LENGTH: usize = 512;
pub const FRAME_STRIDE: usize = 320;
pub const NUM_FILTERS: usize = 40;
pub const PRE_EMPHASIS: f64 = 0.97;
pub const LOG_FLOOR: f64 = 1e-20;

const NUM_BINS: usize = FRAME_LENGTH / 2 + 1;

/// N x 26 matrix of cepstral coefficients, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccMatrix {
    values: Array2<f64>,
}

impl MfccMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.ncols() != NUM_MFCC {
            return Err(Error::DimensionMismatch(format!(
                "MFCC matrix must have {NUM_MFCC} columns, got {}",
                values.ncols()
            )));
        }
        if values.nrows() == 0 {
            return Err(Error::EmptyInput("MFCC matrix has no frames"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("MFCC matrix has non-finite entries".into()));
        }
        Ok(Self { values })
    }

    pub fn num_frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn frame(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.values
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Reusable extractor holding the window, filterbank, DCT basis and FFT plan.
pub struct MfccExtractor {
    window: Vec<f64>,
    filterbank: Array2<f64>,
    dct: Array2<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl Default for MfccExtractor {
    fn default() -> Self {
        Self::new()
    }
}

impl MfccExtractor {
    pub fn new() -> Self {
        let window = (0..FRAME_LENGTH)
            .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / (FRAME_LENGTH - 1) as f64).cos())
            .collect();

        let nyquist = f64::from(SAMPLE_RATE) / 2.0;
        let mel_max = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..NUM_FILTERS + 2)
            .map(|i| mel_to_hz(mel_max * i as f64 / (NUM_FILTERS + 1) as f64))
            .collect();
        let bin_hz = f64::from(SAMPLE_RATE) / FRAME_LENGTH as f64;
        let filterbank = Array2::from_shape_fn((NUM_FILTERS, NUM_BINS), |(m, b)| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let f = b as f64 * bin_hz;
            if f > lo && f <= mid {
                (f - lo) / (mid - lo)
            } else if f > mid && f < hi {
                (hi - f) / (hi - mid)
            } else {
                0.0
            }
        });

        let n = NUM_FILTERS as f64;
        let dct = Array2::from_shape_fn((NUM_MFCC, NUM_FILTERS), |(k, m)| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            scale * (PI * k as f64 * (2.0 * m as f64 + 1.0) / (2.0 * n)).cos()
        });

        let fft = FftPlanner::new().plan_fft_forward(FRAME_LENGTH);
        Self {
            window,
            filterbank,
            dct,
            fft,
        }
    }

    pub fn num_frames(num_samples: usize) -> usize {
        if num_samples < FRAME_LENGTH {
            0
        } else {
            1 + (num_samples - FRAME_LENGTH) / FRAME_STRIDE
        }
    }

    pub fn compute(&self, clip: &AudioClip) -> Result<MfccMatrix> {
        let x = clip.samples();
        if x.len() < FRAME_LENGTH {
            return Err(Error::TooShort {
                samples: x.len(),
                required: FRAME_LENGTH,
            });
        }
        let emphasized: Vec<f64> = std::iter::once(x[0])
            .chain(x.windows(2).map(|w| w[1] - PRE_EMPHASIS * w[0]))
            .collect();

        let frames = Self::num_frames(x.len());
        let mut out = Array2::zeros((frames, NUM_MFCC));
        let mut buf = vec![Complex::new(0.0, 0.0); FRAME_LENGTH];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut power = [0.0f64; NUM_BINS];
        let mut log_energy = [0.0f64; NUM_FILTERS];

        for (i, mut row) in out.rows_mut().into_iter().enumerate() {
            let start = i * FRAME_STRIDE;
            let frame = &emphasized[start..start + FRAME_LENGTH];
            for ((c, &s), &w) in buf.iter_mut().zip(frame).zip(&self.window) {
                *c = Complex::new(s * w, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr() / FRAME_LENGTH as f64;
            }
            for (e, filter) in log_energy.iter_mut().zip(self.filterbank.rows()) {
                let energy: f64 = filter.iter().zip(&power).map(|(w, p)| w * p).sum();
                *e = (energy + LOG_FLOOR).ln();
            }
            // Higher DCT rows sum to zero, so offsetting by the first log
            // energy leaves them unchanged mathematically and makes them
            // exactly zero on flat spectra.
            let base = log_energy[0];
            for (k, (c, basis)) in row.iter_mut().zip(self.dct.rows()).enumerate() {
                *c = if k == 0 {
                    basis.iter().zip(&log_energy).map(|(b, e)| b * e).sum()
                } else {
                    basis.iter().zip(&log_energy).map(|(b, e)| b * (e - base)).sum()
                };
            }
        }
        MfccMatrix::new(out)
    }
}

pub fn compute_mfcc(clip: &AudioClip) -> Result<MfccMatrix> {
    MfccExtractor::new().compute(clip)
}
