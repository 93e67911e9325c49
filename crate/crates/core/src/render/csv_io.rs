use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Writes `frame,mfcc_0,...` and one row per frame with 9 significant digits.
pub fn export_csv(matrix: ArrayView2<'_, f64>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["frame".to_string()];
    header.extend((0..matrix.ncols()).map(|k| format!("mfcc_{k}")));
    w.write_record(&header)?;
    for (i, row) in matrix.outer_iter().enumerate() {
        let mut record = vec![i.to_string()];
        record.extend(row.iter().map(|v| format!("{v:.8e}")));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a matrix written by [`export_csv`].
pub fn read_csv(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let cols = r.headers()?.len().saturating_sub(1);
    let mut values = Vec::new();
    let mut rows = 0;
    for record in r.records() {
        let record = record?;
        for field in record.iter().skip(1) {
            values.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {rows}: {e}")))?,
            );
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, cols), values)
        .map_err(|e| Error::Parse(format!("ragged CSV: {e}")))
}
