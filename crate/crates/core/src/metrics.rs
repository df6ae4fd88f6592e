//! Prediction accuracy.

use crate::{Error, Result};

/// Out-of-sample `R² = 1 - Σ(y - ŷ)² / Σ(y - ȳ)²`, with `ȳ` the mean of the
/// evaluated outcomes themselves.
pub fn out_of_sample_r2(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} outcomes, {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.len() < 2 {
        return Err(Error::InvalidArgument("R² needs at least two outcomes".into()));
    }
    let n = y_true.len() as f64;
    let mean = y_true.iter().sum::<f64>() / n;
    let ss_tot: f64 = y_true.iter().map(|y| (y - mean).powi(2)).sum();
    let variance = ss_tot / n;
    if !(variance > 1e-24) {
        return Err(Error::DegenerateTarget { variance });
    }
    let ss_res: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(y, p)| (y - p).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}
