//! Least squares as an attention mechanism.
//!
//! OLS, ridge and principal-component regression are expressed as linear
//! attention over spectrally embedded predictors: a prediction is a weighted
//! sum of training outcomes, with weights given by inner products in an
//! embedding space `X_query Ω X_key'`. On top of that sits a nonlinear
//! multi-head attention regression (softmax over learned Cholesky-factored
//! metrics) trained with L-BFGS, a set of simulation designs for
//! benchmarking, and self-attention views of AR/VAR fitted values.
//!
//! Module map:
//!
//! - [`linalg`]: spectral embedding, factor scores, OLS and its proximity form
//! - [`attention`]: embedding matrices (OLS, ridge, PCR) and activations
//! - [`attreg`]: the multi-head attention regression estimator
//! - [`optim`]: limited-memory BFGS with a strong Wolfe line search
//! - [`dgp`]: simulation data-generating processes with SNR calibration
//! - [`timeseries`]: AR(1)/VAR(1) hat matrices as attention, causal masking
//! - [`metrics`]: out-of-sample R²

pub mod attention;
pub mod attreg;
pub mod dgp;
mod error;
pub mod linalg;
pub mod metrics;
pub mod optim;
pub mod timeseries;

pub use error::{Error, Result};
pub use linalg::DesignMatrix;

/// Formats a float with 17 significant digits, enough to round-trip exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
