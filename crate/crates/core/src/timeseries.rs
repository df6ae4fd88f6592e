//! Autoregressions viewed as self-attention.
//!
//! The in-sample fitted values of an AR(1) or VAR(1) estimated by least
//! squares are `A y₊` with `A = Y₋₁ (Y₋₁'Y₋₁)^{-1} Y₋₁'`: every fitted value
//! is a weighted combination of all observed outcomes, past and future.
//! Causal masking keeps only sources up to the target date and renormalizes.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{factor_scores, spectral_embedding, DesignMatrix, ScoreOrigin, DEFAULT_TOL};
use crate::{Error, Result};

const MIN_LAG_ENERGY: f64 = 1e-24;
const MIN_MASK_SUM: f64 = 1e-12;

/// Hat matrix of a lag-1 regression. Rows index targets `y₂..y_N`, columns
/// index sources `y₁..y_{N-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesAttention {
    pub weights: DMatrix<f64>,
    pub lag: usize,
}

/// AR(1) without intercept: returns `a = y₋₁ y₋₁' / (y₋₁'y₋₁)` and the
/// fitted values `a y₊`.
pub fn ar1_attention(y: &[f64]) -> Result<(SeriesAttention, DVector<f64>)> {
    if y.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "series needs at least 3 observations, got {}",
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("series".into()));
    }
    let n = y.len() - 1;
    let lagged = DVector::from_column_slice(&y[..n]);
    let lead = DVector::from_column_slice(&y[1..]);
    let energy = lagged.dot(&lagged);
    if energy < MIN_LAG_ENERGY {
        return Err(Error::DegenerateLag { energy });
    }
    let weights = &lagged * lagged.transpose() / energy;
    let fitted = &weights * lead;
    Ok((SeriesAttention { weights, lag: 1 }, fitted))
}

/// Relative gap between the lagged gram `y₋₁'y₋₁` and the full-sample `y'y`.
pub fn lag_gram_discrepancy(y: &[f64]) -> f64 {
    let full: f64 = y.iter().map(|v| v * v).sum();
    let lagged: f64 = y[..y.len().saturating_sub(1)].iter().map(|v| v * v).sum();
    (full - lagged).abs() / full
}

/// Weights of `row` restricted to sources `τ ≤ t` (1-based) and rescaled to
/// sum to one; later sources get zero.
pub fn masked_weights(row: &[f64], t: usize) -> Result<Vec<f64>> {
    if t == 0 || t > row.len() {
        return Err(Error::InvalidArgument(format!(
            "time index {t} outside 1..={}",
            row.len()
        )));
    }
    let sum: f64 = row[..t].iter().sum();
    if !(sum.abs() > MIN_MASK_SUM) {
        return Err(Error::DegenerateMask { t, sum });
    }
    Ok(row
        .iter()
        .enumerate()
        .map(|(tau, a)| if tau < t { a / sum } else { 0.0 })
        .collect())
}

/// Causally masked prediction `Σ_{τ≤t} a_τ y_τ / Σ_{τ≤t} a_τ`.
pub fn masked_prediction(row: &[f64], y: &[f64], t: usize) -> Result<f64> {
    if row.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} sources",
            row.len(),
            y.len()
        )));
    }
    let w = masked_weights(row, t)?;
    Ok(w[..t].iter().zip(y).map(|(a, v)| a * v).sum())
}

/// Total absolute weight that `row` places on sources after `t`.
pub fn future_weight_mass(row: &[f64], t: usize) -> f64 {
    row.iter().skip(t).map(|a| a.abs()).sum()
}

/// VAR(1) fitted values as self-attention over an `N × M` panel.
///
/// Returns the `(N-1) × (N-1)` hat matrix `A` built from the lagged panel
/// (with a leading constant column when `include_intercept` is set) and the
/// fitted values `A Y₊`.
pub fn var_self_attention(
    panel: &DMatrix<f64>,
    include_intercept: bool,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n, m) = panel.shape();
    if n < 2 || m == 0 {
        return Err(Error::DimensionMismatch(format!("panel is {n}x{m}")));
    }
    let lagged = DesignMatrix::new(panel.rows(0, n - 1).into_owned())?;
    let lagged = if include_intercept {
        lagged.with_intercept()
    } else {
        lagged
    };
    if lagged.nrows() < lagged.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} lagged observations for {} regressors",
            lagged.nrows(),
            lagged.ncols()
        )));
    }
    let lead = panel.rows(1, n - 1);
    let emb = spectral_embedding(&lagged.gram(), DEFAULT_TOL)?;
    let scores = factor_scores(&lagged, &emb, ScoreOrigin::Train)?;
    let hat = &scores.values * scores.values.transpose();
    let fitted = &hat * lead;
    Ok((hat, fitted))
}
