//! The three display aggregations and descriptive attribution statistics.

mod stats;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::attribution::AttributionTensor;
use crate::error::{Error, Result};
use crate::features::{CONTEXT, NUM_MFCC, WINDOW_ROWS};

pub use stats::{
    aggregated_stats, attribution_stats, compare_stats, AttributionStats, StatsDelta,
    DEFAULT_HEAD_FRAMES,
};

/// How an N x 19 x 26 tensor is reduced to N x 26.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "position")]
pub enum DisplayMode {
    /// `A[i, j, k]` for one relative position `j` (9 is the centre frame).
    RelativeFrame(usize),
    /// Total influence of each frame over every window that contains it.
    SummedPerFrame,
    /// Sum over the 19 positions of each window.
    SummedPerWindow,
}

impl FromStr for DisplayMode {
    type Err = Error;

    /// `relative:<j>`, `per-frame` or `per-window`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-frame" => Ok(DisplayMode::SummedPerFrame),
            "per-window" => Ok(DisplayMode::SummedPerWindow),
            _ => {
                let j = s
                    .strip_prefix("relative:")
                    .and_then(|j| j.parse::<usize>().ok())
                    .ok_or_else(|| {
                        Error::InvalidConfig(format!(
                            "display must be relative:<j>, per-frame or per-window, got {s:?}"
                        ))
                    })?;
                if j >= WINDOW_ROWS {
                    return Err(Error::IndexOutOfRange {
                        index: j,
                        limit: WINDOW_ROWS,
                    });
                }
                Ok(DisplayMode::RelativeFrame(j))
            }
        }
    }
}

impl fmt::Display for DisplayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DisplayMode::RelativeFrame(j) => write!(f, "relative:{j}"),
            DisplayMode::SummedPerFrame => f.write_str("per-frame"),
            DisplayMode::SummedPerWindow => f.write_str("per-window"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedAttribution {
    values: Array2<f64>,
    mode: DisplayMode,
}

impl AggregatedAttribution {
    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn mode(&self) -> DisplayMode {
        self.mode
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }
}

pub fn slice_relative_frame(tensor: &AttributionTensor, j: usize) -> Result<AggregatedAttribution> {
    if j >= WINDOW_ROWS {
        return Err(Error::IndexOutOfRange {
            index: j,
            limit: WINDOW_ROWS,
        });
    }
    Ok(AggregatedAttribution {
        values: tensor.values().index_axis(Axis(1), j).to_owned(),
        mode: DisplayMode::RelativeFrame(j),
    })
}

/// `out[i, k] = sum_w A[w, i - w + 9, k]` over windows `w` within 9 frames of `i`.
pub fn sum_per_frame(tensor: &AttributionTensor) -> AggregatedAttribution {
    let a = tensor.values();
    let n = tensor.num_windows();
    let mut values = Array2::zeros((n, NUM_MFCC));
    for (i, mut row) in values.outer_iter_mut().enumerate() {
        let first = i.saturating_sub(CONTEXT);
        let last = (i + CONTEXT).min(n - 1);
        for w in first..=last {
            row += &a.slice(ndarray::s![w, i + CONTEXT - w, ..]);
        }
    }
    AggregatedAttribution {
        values,
        mode: DisplayMode::SummedPerFrame,
    }
}

/// `out[i, k] = sum_j A[i, j, k]`.
pub fn sum_per_window(tensor: &AttributionTensor) -> AggregatedAttribution {
    AggregatedAttribution {
        values: tensor.values().sum_axis(Axis(1)),
        mode: DisplayMode::SummedPerWindow,
    }
}

pub fn aggregate(tensor: &AttributionTensor, mode: DisplayMode) -> Result<AggregatedAttribution> {
    match mode {
        DisplayMode::RelativeFrame(j) => slice_relative_frame(tensor, j),
        DisplayMode::SummedPerFrame => Ok(sum_per_frame(tensor)),
        DisplayMode::SummedPerWindow => Ok(sum_per_window(tensor)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::Method;
    use ndarray::Array3;
    use proptest::prelude::*;

    fn constant(n: usize, v: f64) -> AttributionTensor {
        AttributionTensor::from_values(Array3::from_elem((n, WINDOW_ROWS, NUM_MFCC), v), Method::Lrp)
            .unwrap()
    }

    fn dyadic(n: usize, seed: u64) -> AttributionTensor {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        AttributionTensor::from_values(
            Array3::from_shape_simple_fn((n, WINDOW_ROWS, NUM_MFCC), || {
                f64::from(rng.gen_range(-512i32..512)) / 256.0
            }),
            Method::Lrp,
        )
        .unwrap()
    }

    #[test]
    fn display_mode_parsing() {
        assert_eq!("per-frame".parse::<DisplayMode>().unwrap(), DisplayMode::SummedPerFrame);
        assert_eq!("per-window".parse::<DisplayMode>().unwrap(), DisplayMode::SummedPerWindow);
        assert_eq!("relative:9".parse::<DisplayMode>().unwrap(), DisplayMode::RelativeFrame(9));
        assert!(matches!(
            "relative:19".parse::<DisplayMode>().unwrap_err(),
            Error::IndexOutOfRange { index: 19, .. }
        ));
        for bad in ["", "relative:", "relative:-1", "relative:x", "window"] {
            assert!(bad.parse::<DisplayMode>().is_err());
        }
        for m in [DisplayMode::RelativeFrame(3), DisplayMode::SummedPerFrame] {
            assert_eq!(m.to_string().parse::<DisplayMode>().unwrap(), m);
        }
    }

    #[test]
    fn relative_slices() {
        let t = dyadic(5, 1);
        let c = slice_relative_frame(&t, 9).unwrap();
        assert_eq!(c.values(), t.values().index_axis(Axis(1), 9));
        let ones = slice_relative_frame(&constant(4, 1.0), 0).unwrap();
        assert!(ones.values().iter().all(|&v| v == 1.0));
        assert_eq!(ones.values().dim(), (4, 26));
        assert!(slice_relative_frame(&t, 19).is_err());
    }

    #[test]
    fn per_frame_window_counts() {
        let out = sum_per_frame(&constant(40, 1.0));
        assert!(out.values().row(0).iter().all(|&v| v == 10.0));
        assert!(out.values().row(39).iter().all(|&v| v == 10.0));
        assert!(out.values().row(3).iter().all(|&v| v == 13.0));
        for i in 9..=30 {
            assert!(out.values().row(i).iter().all(|&v| v == 19.0));
        }
    }

    #[test]
    fn single_window_per_frame_is_centre_row() {
        let t = dyadic(1, 2);
        assert_eq!(sum_per_frame(&t).values(), t.values().slice(ndarray::s![.., 9, ..]));
    }

    #[test]
    fn per_window_sums() {
        assert!(sum_per_window(&constant(3, 1.0)).values().iter().all(|&v| v == 19.0));
        assert!(sum_per_window(&constant(3, 0.0)).values().iter().all(|&v| v == 0.0));
        let mut centre_only = Array3::zeros((4, WINDOW_ROWS, NUM_MFCC));
        centre_only.index_axis_mut(Axis(1), 9).fill(2.5);
        let t = AttributionTensor::from_values(centre_only, Method::Shap).unwrap();
        assert_eq!(
            sum_per_window(&t).values(),
            slice_relative_frame(&t, 9).unwrap().values()
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn identities_on_dyadic_tensors(n in 1usize..60, seed in any::<u64>(), lambda in -8i32..8) {
            // Dyadic entries make every sum exact, so equalities are bitwise.
            let t = dyadic(n, seed);
            let padded = t.with_padding_zeroed();
            let total = padded.values().sum();
            prop_assert_eq!(sum_per_frame(&padded).values().sum(), total);
            prop_assert_eq!(sum_per_window(&padded).values().sum(), total);
            // Out-of-range positions never reach the per-frame sum.
            prop_assert_eq!(sum_per_frame(&t), sum_per_frame(&padded));

            let mut by_slices = Array2::zeros((n, NUM_MFCC));
            for j in 0..WINDOW_ROWS {
                by_slices += &slice_relative_frame(&t, j).unwrap().values();
            }
            prop_assert_eq!(by_slices, sum_per_window(&t).into_values());

            let lambda = f64::from(lambda);
            let u = dyadic(n, seed.wrapping_add(1));
            let combo = AttributionTensor::from_values(
                &t.values() * lambda + u.values(),
                Method::Lrp,
            ).unwrap();
            for mode in [DisplayMode::RelativeFrame(4), DisplayMode::SummedPerFrame, DisplayMode::SummedPerWindow] {
                let lhs = aggregate(&combo, mode).unwrap().into_values();
                let rhs = aggregate(&t, mode).unwrap().into_values() * lambda
                    + aggregate(&u, mode).unwrap().into_values();
                prop_assert_eq!(lhs, rhs);
            }
        }
    }
}
