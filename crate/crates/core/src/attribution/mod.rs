//! Per-window attribution matrices by Saliency Map, epsilon-LRP and sampled
//! Shapley values, with an exact Shapley enumerator for verification.

mod exact;
mod export;
mod lrp;
mod saliency;
mod shap;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Array3, ArrayView2, ArrayView3, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FrameWindow, CONTEXT, NUM_MFCC, WINDOW_ROWS};
use crate::model::{forward_trace, CharSet, ModelParams, NUM_CLASSES};

pub use exact::{exact_shapley, Coalition, MAX_EXACT_FEATURES};
pub use export::{
    attribution_from_json, attribution_to_json, read_attribution_json, write_attribution_csv,
    write_attribution_json, AttributionDocument,
};
pub use lrp::{compute_lrp, lrp_layer_relevances, LrpConfig, DEFAULT_EPSILON, LRP_GUARD};
pub use saliency::compute_saliency;
pub use shap::{
    build_background, compute_shap, compute_shap_estimate, letter_windows, sample_shapley,
    BackgroundSample, CoalitionGame, FnGame, ModelGame, ShapConfig, ShapEstimate,
    DEFAULT_PERMUTATIONS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Saliency,
    Lrp,
    Shap,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Saliency => "saliency",
            Method::Lrp => "lrp",
            Method::Shap => "shap",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "saliency" => Ok(Method::Saliency),
            "lrp" => Ok(Method::Lrp),
            "shap" => Ok(Method::Shap),
            other => Err(Error::InvalidConfig(format!(
                "unknown method {other:?} (expected saliency, lrp or shap)"
            ))),
        }
    }
}

/// Which output neuron each window's attribution explains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetSpec {
    /// The predicted character (largest logit) of each window.
    #[default]
    Argmax,
    /// A fixed character index for every window.
    Fixed(usize),
}

impl FromStr for TargetSpec {
    type Err = Error;

    /// Accepts `argmax` or `char:<c>`, where `<c>` is one symbol of the
    /// charset or one of the names `space` and `hyphen`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "argmax" {
            return Ok(TargetSpec::Argmax);
        }
        let Some(sym) = s.strip_prefix("char:") else {
            return Err(Error::InvalidConfig(format!(
                "target must be `argmax` or `char:<c>`, got {s:?}"
            )));
        };
        let index = match sym {
            "space" => Some(CharSet::SPACE),
            "hyphen" => Some(CharSet::HYPHEN),
            _ => {
                let mut chars = sym.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => CharSet::index_of(c),
                    _ => None,
                }
            }
        };
        index
            .map(TargetSpec::Fixed)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown target character {sym:?}")))
    }
}

impl fmt::Display for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            TargetSpec::Argmax => f.write_str("argmax"),
            TargetSpec::Fixed(CharSet::SPACE) => f.write_str("char:space"),
            TargetSpec::Fixed(CharSet::HYPHEN) => f.write_str("char:hyphen"),
            TargetSpec::Fixed(c) => write!(f, "char:{}", CharSet::symbol(c).unwrap_or('?')),
        }
    }
}

/// Method plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodConfig {
    Saliency,
    Lrp(LrpConfig),
    Shap(ShapConfig),
}

impl MethodConfig {
    pub fn method(&self) -> Method {
        match self {
            MethodConfig::Saliency => Method::Saliency,
            MethodConfig::Lrp(_) => Method::Lrp,
            MethodConfig::Shap(_) => Method::Shap,
        }
    }
}

/// N x 19 x 26 stack of attribution matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionTensor {
    values: Array3<f64>,
    method: Method,
    targets: Vec<usize>,
}

impl AttributionTensor {
    pub fn new(values: Array3<f64>, method: Method, targets: Vec<usize>) -> Result<Self> {
        let (n, rows, cols) = values.dim();
        if (rows, cols) != (WINDOW_ROWS, NUM_MFCC) {
            return Err(Error::ShapeMismatch(format!(
                "attribution tensor must be Nx{WINDOW_ROWS}x{NUM_MFCC}, got {:?}",
                values.dim()
            )));
        }
        if targets.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{} targets for {n} windows",
                targets.len()
            )));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= NUM_CLASSES) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                limit: NUM_CLASSES,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("attribution has non-finite entries".into()));
        }
        if method == Method::Saliency && values.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidConfig("saliency entries must be non-negative".into()));
        }
        Ok(Self {
            values: values.as_standard_layout().into_owned(),
            method,
            targets,
        })
    }

    /// Tensor with no method constraints, for synthetic data and aggregation tests.
    pub fn from_values(values: Array3<f64>, method: Method) -> Result<Self> {
        let n = values.len_of(Axis(0));
        Self::new(values, method, vec![0; n])
    }

    pub fn num_windows(&self) -> usize {
        self.values.len_of(Axis(0))
    }

    pub fn values(&self) -> ArrayView3<'_, f64> {
        self.values.view()
    }

    pub fn window(&self, i: usize) -> ArrayView2<'_, f64> {
        self.values.index_axis(Axis(0), i)
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn into_values(self) -> Array3<f64> {
        self.values
    }

    /// Copy with every entry whose position maps to a frame outside
    /// `[0, N)` set to zero.
    pub fn with_padding_zeroed(&self) -> Self {
        let n = self.num_windows() as isize;
        let mut values = self.values.clone();
        for (i, mut window) in values.outer_iter_mut().enumerate() {
            for (j, mut row) in window.outer_iter_mut().enumerate() {
                let frame = i as isize + j as isize - CONTEXT as isize;
                if frame < 0 || frame >= n {
                    row.fill(0.0);
                }
            }
        }
        Self {
            values,
            method: self.method,
            targets: self.targets.clone(),
        }
    }
}

/// Attribution matrix of one window for one target.
pub fn attribute_window(
    model: &ModelParams,
    window: &FrameWindow,
    target: usize,
    config: &MethodConfig,
    window_index: usize,
) -> Result<Array2<f64>> {
    match config {
        MethodConfig::Saliency => compute_saliency(model, window, target),
        MethodConfig::Lrp(cfg) => compute_lrp(model, window, target, cfg),
        MethodConfig::Shap(cfg) => {
            let cfg = cfg.for_window(window_index);
            compute_shap(model, window, target, &cfg)
        }
    }
}

/// Resolves the target of every window.
pub fn resolve_targets(
    model: &ModelParams,
    windows: &[FrameWindow],
    target: TargetSpec,
) -> Result<Vec<usize>> {
    match target {
        TargetSpec::Fixed(c) if c >= NUM_CLASSES => Err(Error::IndexOutOfRange {
            index: c,
            limit: NUM_CLASSES,
        }),
        TargetSpec::Fixed(c) => Ok(vec![c; windows.len()]),
        TargetSpec::Argmax => windows
            .par_iter()
            .map(|w| forward_trace(model, w).map(|t| t.argmax()))
            .collect(),
    }
}

/// Attributes every window, in parallel on the current rayon pool. Results
/// are assembled by window index, so output does not depend on scheduling.
pub fn attribute_windows(
    model: &ModelParams,
    windows: &[FrameWindow],
    target: TargetSpec,
    config: &MethodConfig,
) -> Result<AttributionTensor> {
    let targets = resolve_targets(model, windows, target)?;
    let mats: Vec<Array2<f64>> = windows
        .par_iter()
        .zip(targets.par_iter())
        .enumerate()
        .map(|(i, (w, &c))| attribute_window(model, w, c, config, i))
        .collect::<Result<_>>()?;
    let mut values = Array3::zeros((windows.len(), WINDOW_ROWS, NUM_MFCC));
    for (mut slot, m) in values.outer_iter_mut().zip(&mats) {
        slot.assign(m);
    }
    AttributionTensor::new(values, config.method(), targets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_spec_parsing() {
        assert_eq!("argmax".parse::<TargetSpec>().unwrap(), TargetSpec::Argmax);
        assert_eq!("char:a".parse::<TargetSpec>().unwrap(), TargetSpec::Fixed(0));
        assert_eq!("char: ".parse::<TargetSpec>().unwrap(), TargetSpec::Fixed(26));
        assert_eq!("char:space".parse::<TargetSpec>().unwrap(), TargetSpec::Fixed(26));
        assert_eq!("char:-".parse::<TargetSpec>().unwrap(), TargetSpec::Fixed(27));
        for bad in ["", "char:", "char:ab", "char:A", "max", "char:é"] {
            assert!(bad.parse::<TargetSpec>().is_err(), "{bad:?}");
        }
        for t in [TargetSpec::Argmax, TargetSpec::Fixed(3), TargetSpec::Fixed(26)] {
            assert_eq!(t.to_string().parse::<TargetSpec>().unwrap(), t);
        }
    }

    #[test]
    fn method_parsing() {
        assert_eq!("lrp".parse::<Method>().unwrap(), Method::Lrp);
        assert!("foo".parse::<Method>().is_err());
    }

    #[test]
    fn tensor_validation() {
        assert!(AttributionTensor::from_values(Array3::zeros((2, 19, 26)), Method::Lrp).is_ok());
        assert!(AttributionTensor::from_values(Array3::zeros((2, 18, 26)), Method::Lrp).is_err());
        assert!(AttributionTensor::new(Array3::zeros((2, 19, 26)), Method::Lrp, vec![0]).is_err());
        assert!(AttributionTensor::new(Array3::zeros((1, 19, 26)), Method::Lrp, vec![28]).is_err());
        assert!(
            AttributionTensor::from_values(Array3::from_elem((1, 19, 26), -1.0), Method::Saliency)
                .is_err()
        );
    }
}
