use ndarray::{s, Array2, ArrayView2};

use super::mfcc::{MfccMatrix, NUM_MFCC};
use crate::error::{Error, Result};

/// Frames of context on each side of the centre frame.
pub const CONTEXT: usize = 9;
pub const WINDOW_ROWS: usize = 2 * CONTEXT + 1;
/// Flattened window length, 19 * 26.
pub const WINDOW_FEATURES: usize = WINDOW_ROWS * NUM_MFCC;

/// 19 x 26 context window centred on one frame. Row 9 is the centre frame;
/// rows that fall outside the utterance are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameWindow {
    values: Array2<f64>,
    center_index: usize,
}

impl FrameWindow {
    pub fn new(values: Array2<f64>, center_index: usize) -> Result<Self> {
        if values.dim() != (WINDOW_ROWS, NUM_MFCC) {
            return Err(Error::DimensionMismatch(format!(
                "window must be {WINDOW_ROWS}x{NUM_MFCC}, got {:?}",
                values.dim()
            )));
        }
        Ok(Self {
            values: values.as_standard_layout().into_owned(),
            center_index,
        })
    }

    /// Builds a window from 494 features in row-major (position, bin) order.
    pub fn from_flat(features: Vec<f64>, center_index: usize) -> Result<Self> {
        let len = features.len();
        let values = Array2::from_shape_vec((WINDOW_ROWS, NUM_MFCC), features).map_err(|_| {
            Error::DimensionMismatch(format!("expected {WINDOW_FEATURES} features, got {len}"))
        })?;
        Ok(Self {
            values,
            center_index,
        })
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn center_index(&self) -> usize {
        self.center_index
    }

    /// Row-major view of the 494 input features.
    pub fn as_flat(&self) -> &[f64] {
        self.values
            .as_slice()
            .expect("window storage is always standard layout")
    }
}

/// One window per frame; window `i` row `r` holds frame `i + r - 9`.
pub fn make_windows(mfcc: &MfccMatrix) -> Vec<FrameWindow> {
    let n = mfcc.num_frames();
    let frames = mfcc.values();
    (0..n)
        .map(|i| {
            let mut values = Array2::zeros((WINDOW_ROWS, NUM_MFCC));
            let first = i.saturating_sub(CONTEXT);
            let last = (i + CONTEXT).min(n - 1);
            let row0 = first + CONTEXT - i;
            values
                .slice_mut(s![row0..row0 + (last - first + 1), ..])
                .assign(&frames.slice(s![first..=last, ..]));
            FrameWindow {
                values,
                center_index: i,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(n: usize) -> MfccMatrix {
        MfccMatrix::new(Array2::from_shape_fn((n, NUM_MFCC), |(i, k)| {
            1.0 + i as f64 * 100.0 + k as f64
        }))
        .unwrap()
    }

    fn nonzero_rows(w: &FrameWindow) -> Vec<usize> {
        (0..WINDOW_ROWS)
            .filter(|&r| w.values().row(r).iter().any(|&v| v != 0.0))
            .collect()
    }

    #[test]
    fn single_frame() {
        let m = ramp(1);
        let w = make_windows(&m);
        assert_eq!(w.len(), 1);
        assert_eq!(nonzero_rows(&w[0]), vec![CONTEXT]);
        assert_eq!(w[0].values().row(CONTEXT), m.frame(0));
    }

    #[test]
    fn three_frames_middle_window() {
        let m = ramp(3);
        let w = make_windows(&m);
        assert_eq!(nonzero_rows(&w[1]), vec![8, 9, 10]);
        for (r, f) in [(8, 0), (9, 1), (10, 2)] {
            assert_eq!(w[1].values().row(r), m.frame(f));
        }
    }

    #[test]
    fn flat_layout_is_row_major() {
        let w = &make_windows(&ramp(2))[0];
        let flat = w.as_flat();
        assert_eq!(flat.len(), WINDOW_FEATURES);
        assert_eq!(flat[CONTEXT * NUM_MFCC + 3], w.values()[[CONTEXT, 3]]);
        assert_eq!(
            FrameWindow::from_flat(flat.to_vec(), 0).unwrap().values(),
            w.values()
        );
        assert!(FrameWindow::from_flat(vec![0.0; 10], 0).is_err());
        assert!(FrameWindow::new(Array2::zeros((18, 26)), 0).is_err());
    }

    proptest! {
        #[test]
        fn window_invariants(n in 1usize..60) {
            let m = ramp(n);
            let windows = make_windows(&m);
            prop_assert_eq!(windows.len(), n);
            for (i, w) in windows.iter().enumerate() {
                prop_assert_eq!(w.values().dim(), (WINDOW_ROWS, NUM_MFCC));
                prop_assert_eq!(w.center_index(), i);
                prop_assert_eq!(w.values().row(CONTEXT).to_owned(), m.frame(i).to_owned());
                let expected = i.min(CONTEXT) + 1 + (n - 1 - i).min(CONTEXT);
                prop_assert_eq!(nonzero_rows(w).len(), expected);
                for r in 0..WINDOW_ROWS {
                    let frame = i as isize + r as isize - CONTEXT as isize;
                    if frame >= 0 && (frame as usize) < n {
                        prop_assert_eq!(w.values().row(r).to_owned(), m.frame(frame as usize).to_owned());
                    }
                }
            }
            let centres: Vec<f64> = windows
                .iter()
                .flat_map(|w| w.values().row(CONTEXT).to_vec())
                .collect();
            prop_assert_eq!(centres, m.values().iter().cloned().collect::<Vec<_>>());
        }
    }
}
