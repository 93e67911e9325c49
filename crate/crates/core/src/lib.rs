//! Input-feature attributions for a frame-based speech character classifier.
//!
//! Audio is turned into 26 MFCCs per 20 ms frame, each frame is classified
//! from a 19-frame context window, and the decision for a chosen output
//! character is explained per input feature by Saliency Map, epsilon-LRP or
//! sampled Shapley values. Attributions can be aggregated over the windows
//! in three ways, summarised, and rendered as red/blue SVG heatmaps.

pub mod error;
pub mod features;
pub mod model;
pub mod attribution;

pub use error::{Error, Result};
pub mod aggregate;
pub mod render;
pub mod demo;
pub mod verify;
