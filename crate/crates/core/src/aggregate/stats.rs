use std::fmt::Write as _;

use ndarray::{ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::AggregatedAttribution;
use crate::attribution::AttributionTensor;
use crate::error::{Error, Result};

/// Leading-frame count used for the head energy fraction when not given.
pub const DEFAULT_HEAD_FRAMES: usize = 10;

/// Magnitude summaries used to contrast two inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionStats {
    /// Mean |A| per MFCC bin (26 entries).
    pub per_bin_mean_magnitude: Vec<f64>,
    /// Mean |A| per relative window position (19 entries; empty when
    /// computed from an aggregated matrix).
    pub per_position_mean_magnitude: Vec<f64>,
    pub head_frames: usize,
    /// Share of total |A| carried by the first `head_frames` windows.
    pub head_energy_fraction: f64,
}

/// Componentwise `a - b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsDelta {
    pub per_bin_mean_magnitude: Vec<f64>,
    pub per_position_mean_magnitude: Vec<f64>,
    pub head_frames: usize,
    pub head_energy_fraction: f64,
}

fn check_head(k: usize, n: usize) -> Result<()> {
    if k > n {
        return Err(Error::IndexOutOfRange { index: k, limit: n });
    }
    Ok(())
}

fn head_fraction(per_frame_mass: impl Iterator<Item = f64>, k: usize) -> f64 {
    let mut head = 0.0;
    let mut total = 0.0;
    for (i, m) in per_frame_mass.enumerate() {
        if i < k {
            head += m;
        }
        total += m;
    }
    if total == 0.0 {
        0.0
    } else {
        (head / total).clamp(0.0, 1.0)
    }
}

pub fn attribution_stats(tensor: &AttributionTensor, head_frames: usize) -> Result<AttributionStats> {
    check_head(head_frames, tensor.num_windows())?;
    let mag = tensor.values().mapv(f64::abs);
    let per_bin = mag.mean_axis(Axis(0)).and_then(|m| m.mean_axis(Axis(0)));
    let per_position = mag.mean_axis(Axis(0)).and_then(|m| m.mean_axis(Axis(1)));
    let (per_bin, per_position) = match (per_bin, per_position) {
        (Some(b), Some(p)) => (b.to_vec(), p.to_vec()),
        _ => (vec![0.0; mag.len_of(Axis(2))], vec![0.0; mag.len_of(Axis(1))]),
    };
    Ok(AttributionStats {
        per_bin_mean_magnitude: per_bin,
        per_position_mean_magnitude: per_position,
        head_frames,
        head_energy_fraction: head_fraction(mag.outer_iter().map(|w| w.sum()), head_frames),
    })
}

/// Statistics of an N x 26 aggregated matrix; there is no position axis.
pub fn aggregated_stats(agg: &AggregatedAttribution, head_frames: usize) -> Result<AttributionStats> {
    matrix_stats(agg.values(), head_frames)
}

fn matrix_stats(values: ArrayView2<'_, f64>, head_frames: usize) -> Result<AttributionStats> {
    check_head(head_frames, values.nrows())?;
    let mag = values.mapv(f64::abs);
    let per_bin = mag
        .mean_axis(Axis(0))
        .map_or_else(|| vec![0.0; mag.ncols()], |m| m.to_vec());
    Ok(AttributionStats {
        per_bin_mean_magnitude: per_bin,
        per_position_mean_magnitude: Vec::new(),
        head_frames,
        head_energy_fraction: head_fraction(mag.outer_iter().map(|r| r.sum()), head_frames),
    })
}

pub fn compare_stats(a: &AttributionStats, b: &AttributionStats) -> Result<StatsDelta> {
    if a.per_bin_mean_magnitude.len() != b.per_bin_mean_magnitude.len()
        || a.per_position_mean_magnitude.len() != b.per_position_mean_magnitude.len()
    {
        return Err(Error::ShapeMismatch("statistics vectors differ in length".into()));
    }
    if a.head_frames != b.head_frames {
        return Err(Error::ShapeMismatch(format!(
            "head fractions use different frame counts ({} vs {})",
            a.head_frames, b.head_frames
        )));
    }
    let diff = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p - q).collect();
    Ok(StatsDelta {
        per_bin_mean_magnitude: diff(&a.per_bin_mean_magnitude, &b.per_bin_mean_magnitude),
        per_position_mean_magnitude: diff(
            &a.per_position_mean_magnitude,
            &b.per_position_mean_magnitude,
        ),
        head_frames: a.head_frames,
        head_energy_fraction: a.head_energy_fraction - b.head_energy_fraction,
    })
}

impl StatsDelta {
    pub fn is_zero(&self) -> bool {
        self.head_energy_fraction == 0.0
            && self
                .per_bin_mean_magnitude
                .iter()
                .chain(&self.per_position_mean_magnitude)
                .all(|&d| d == 0.0)
    }

    /// Plain-text table of the deltas.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<14} {:>16}", "mfcc_bin", "delta_mean_abs");
        for (k, d) in self.per_bin_mean_magnitude.iter().enumerate() {
            let _ = writeln!(out, "{k:<14} {d:>16.6e}");
        }
        if !self.per_position_mean_magnitude.is_empty() {
            let _ = writeln!(out, "\n{:<14} {:>16}", "position", "delta_mean_abs");
            for (j, d) in self.per_position_mean_magnitude.iter().enumerate() {
                let _ = writeln!(out, "{j:<14} {d:>16.6e}");
            }
        }
        let _ = writeln!(
            out,
            "\nhead_energy_fraction(k={}) delta: {:.6e}",
            self.head_frames, self.head_energy_fraction
        );
        out
    }
}
