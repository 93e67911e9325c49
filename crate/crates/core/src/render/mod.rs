//! Deterministic SVG heatmaps and CSV export of N x 26 matrices.

mod color;
mod csv_io;
mod heatmap;

pub use color::{color_of, Rgb};
pub use csv_io::{export_csv, read_csv};
pub use heatmap::{percentile, render_heatmap, Heatmap, RenderSpec, DEFAULT_CLIP_PERCENTILE};
