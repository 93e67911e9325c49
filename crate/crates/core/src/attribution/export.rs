//! Attribution tensors on disk.
//!
//! JSON: `{"method", "config", "targets", "shape": [N, 19, 26], "values"}`
//! with `values` flattened row-major. CSV: one row per (window, position).

use std::fs;
use std::path::Path;

use ndarray::Array3;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{AttributionTensor, Method, MethodConfig};
use crate::error::{Error, Result};
use crate::features::{NUM_MFCC, WINDOW_ROWS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributionDocument {
    pub method: Method,
    pub config: Value,
    pub targets: Vec<usize>,
    pub shape: [usize; 3],
    pub values: Vec<f64>,
}

impl AttributionDocument {
    pub fn new(tensor: &AttributionTensor, config: &MethodConfig) -> Self {
        let config = match config {
            MethodConfig::Saliency => json!({}),
            MethodConfig::Lrp(c) => json!({ "epsilon": c.epsilon }),
            MethodConfig::Shap(c) => json!({
                "permutations": c.num_permutations,
                "seed": c.seed,
                "background": c.background.as_flat(),
            }),
        };
        Self {
            method: tensor.method(),
            config,
            targets: tensor.targets().to_vec(),
            shape: [tensor.num_windows(), WINDOW_ROWS, NUM_MFCC],
            values: tensor.values().iter().copied().collect(),
        }
    }

    pub fn into_tensor(self) -> Result<AttributionTensor> {
        let [n, rows, cols] = self.shape;
        if (rows, cols) != (WINDOW_ROWS, NUM_MFCC) {
            return Err(Error::ShapeMismatch(format!(
                "shape {:?} is not [N, {WINDOW_ROWS}, {NUM_MFCC}]",
                self.shape
            )));
        }
        let expected = n.checked_mul(rows * cols);
        if expected != Some(self.values.len()) {
            return Err(Error::ShapeMismatch(format!(
                "shape {:?} needs {} values, found {}",
                self.shape,
                expected.map_or_else(|| "too many".to_string(), |e| e.to_string()),
                self.values.len()
            )));
        }
        let values = Array3::from_shape_vec((n, rows, cols), self.values).expect("length checked");
        AttributionTensor::new(values, self.method, self.targets)
    }
}

pub fn attribution_to_json(tensor: &AttributionTensor, config: &MethodConfig) -> String {
    serde_json::to_string(&AttributionDocument::new(tensor, config)).expect("serializable")
}

/// Parses and validates an attribution document.
pub fn attribution_from_json(text: &str) -> Result<(AttributionTensor, Value)> {
    let doc: AttributionDocument = serde_json::from_str(text)?;
    let config = doc.config.clone();
    Ok((doc.into_tensor()?, config))
}

pub fn write_attribution_json(
    tensor: &AttributionTensor,
    config: &MethodConfig,
    path: impl AsRef<Path>,
) -> Result<()> {
    fs::write(path, attribution_to_json(tensor, config))?;
    Ok(())
}

pub fn read_attribution_json(path: impl AsRef<Path>) -> Result<(AttributionTensor, Value)> {
    attribution_from_json(&fs::read_to_string(path)?)
}

/// Header `window,position,attr_0..attr_25`; values with 9 significant digits.
pub fn write_attribution_csv(tensor: &AttributionTensor, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["window".to_string(), "position".to_string()];
    header.extend((0..NUM_MFCC).map(|k| format!("attr_{k}")));
    w.write_record(&header)?;
    for (i, window) in tensor.values().outer_iter().enumerate() {
        for (j, row) in window.outer_iter().enumerate() {
            let mut record = vec![i.to_string(), j.to_string()];
            record.extend(row.iter().map(|v| format!("{v:.8e}")));
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::{BackgroundSample, LrpConfig, ShapConfig};

    fn tensor() -> AttributionTensor {
        let values = Array3::from_shape_fn((3, WINDOW_ROWS, NUM_MFCC), |(i, j, k)| {
            (i as f64 - 1.0) * 0.1 + j as f64 * 1e-3 + k as f64 / 7.0
        });
        AttributionTensor::new(values, Method::Lrp, vec![0, 5, 27]).unwrap()
    }

    #[test]
    fn json_round_trip() {
        let t = tensor();
        let cfg = MethodConfig::Lrp(LrpConfig::default());
        let text = attribution_to_json(&t, &cfg);
        let (back, config) = attribution_from_json(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(config["epsilon"], 1e-4);
    }

    #[test]
    fn shap_config_is_recorded() {
        let t = tensor();
        let cfg = MethodConfig::Shap(ShapConfig::new(10, 4, BackgroundSample::zeros()).unwrap());
        let doc = AttributionDocument::new(&t, &cfg);
        assert_eq!(doc.config["permutations"], 10);
        assert_eq!(doc.config["seed"], 4);
        assert_eq!(doc.config["background"].as_array().unwrap().len(), 494);
    }

    #[test]
    fn rejects_inconsistent_documents() {
        let t = tensor();
        let mut doc = AttributionDocument::new(&t, &MethodConfig::Saliency);
        doc.shape = [4, 19, 26];
        assert!(doc.clone().into_tensor().is_err());
        doc.shape = [usize::MAX, 19, 26];
        assert!(doc.clone().into_tensor().is_err());
        doc.shape = [3, 26, 19];
        assert!(doc.into_tensor().is_err());
        assert!(attribution_from_json("{\"method\":\"lrp\"").is_err());
        assert!(attribution_from_json("{\"method\":\"foo\",\"config\":{},\"targets\":[],\"shape\":[0,19,26],\"values\":[]}").is_err());
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        write_attribution_csv(&tensor(), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 3 * WINDOW_ROWS);
        assert!(lines[0].starts_with("window,position,attr_0,"));
        assert_eq!(lines[0].split(',').count(), 28);
        let row: Vec<&str> = lines[1 + WINDOW_ROWS + 2].split(',').collect();
        assert_eq!(&row[..2], &["1", "2"]);
        let v: f64 = row[2 + 3].parse().unwrap();
        let want = tensor().values()[[1, 2, 3]];
        assert!((v - want).abs() <= 1e-8 * want.abs());
    }
}
