//! Linear attention `g(X_query Ω X_key') y` with pluggable embeddings and
//! activations.
//!
//! The embedding matrix `Ω` plays the role of `W_Q W_K'`. With `Ω = (X'X)^{-1}`
//! and the identity activation the predictor is exactly OLS; ridge and PCR
//! correspond to regularized and truncated spectral inverses.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{sorted_eigen, spectral_embedding, DesignMatrix, DEFAULT_TOL};
use crate::{Error, Result};

/// Rows whose normalizer magnitude falls below this are rejected.
pub const MIN_NORMALIZER: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EmbeddingKind {
    Ols,
    Ridge(f64),
    Pcr(usize),
    Learned,
}

/// A symmetric positive semi-definite metric `Ω` for query–key similarity.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub values: DMatrix<f64>,
    pub rank: usize,
    pub kind: EmbeddingKind,
}

impl EmbeddingMatrix {
    /// Wraps an arbitrary metric after checking symmetry and semi-definiteness.
    pub fn learned(values: DMatrix<f64>) -> Result<Self> {
        let eig = sorted_eigen(&values, DEFAULT_TOL)?;
        let largest = eig.values[0].max(0.0);
        let smallest = eig.values[eig.values.len() - 1];
        if smallest < -DEFAULT_TOL * largest.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidArgument(format!(
                "metric is not positive semi-definite (eigenvalue {smallest:e})"
            )));
        }
        let rank = eig
            .values
            .iter()
            .filter(|&&l| l > DEFAULT_TOL * largest)
            .count();
        Ok(Self {
            values,
            rank,
            kind: EmbeddingKind::Learned,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }
}

fn spectral_metric(vectors: &DMatrix<f64>, inv_values: &[f64]) -> DMatrix<f64> {
    let p = vectors.nrows();
    let mut scaled = vectors.columns(0, inv_values.len()).into_owned();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= inv_values[k];
    }
    let omega = scaled * vectors.columns(0, inv_values.len()).transpose();
    debug_assert_eq!(omega.nrows(), p);
    // remove rounding asymmetry
    (&omega + omega.transpose()) * 0.5
}

/// `Ω = (X'X)^{-1}`.
pub fn ols_embedding(x_train: &DesignMatrix) -> Result<EmbeddingMatrix> {
    let emb = spectral_embedding(&x_train.gram(), DEFAULT_TOL)?;
    let inv: Vec<f64> = emb.eigenvalues.iter().map(|l| 1.0 / l).collect();
    Ok(EmbeddingMatrix {
        values: spectral_metric(&emb.eigenvectors, &inv),
        rank: x_train.ncols(),
        kind: EmbeddingKind::Ols,
    })
}

/// Tikhonov-regularized inverse `Ω_λ = U (Λ + λI)^{-1} U'`.
pub fn ridge_embedding(x_train: &DesignMatrix, lambda: f64) -> Result<EmbeddingMatrix> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "ridge penalty must be finite and nonnegative, got {lambda}"
        )));
    }
    if lambda == 0.0 {
        let mut omega = ols_embedding(x_train)?;
        omega.kind = EmbeddingKind::Ridge(0.0);
        return Ok(omega);
    }
    let eig = sorted_eigen(&x_train.gram(), DEFAULT_TOL)?;
    let p = eig.values.len();
    let smallest = eig.values[p - 1] + lambda;
    if smallest <= 0.0 {
        return Err(Error::SingularGram {
            eigenvalue: smallest,
            threshold: 0.0,
        });
    }
    let inv: Vec<f64> = eig.values.iter().map(|l| 1.0 / (l + lambda)).collect();
    Ok(EmbeddingMatrix {
        values: spectral_metric(&eig.vectors, &inv),
        rank: p,
        kind: EmbeddingKind::Ridge(lambda),
    })
}

/// Rank-`L` truncated inverse `Ω_L = U_L Λ_L^{-1} U_L'` (principal-component
/// regression).
pub fn pcr_embedding(x_train: &DesignMatrix, rank: usize) -> Result<EmbeddingMatrix> {
    let p = x_train.ncols();
    if rank == 0 || rank > p {
        return Err(Error::RankOutOfRange { rank, max: p });
    }
    let eig = sorted_eigen(&x_train.gram(), DEFAULT_TOL)?;
    let threshold = DEFAULT_TOL * eig.values[0].max(0.0);
    let last = eig.values[rank - 1];
    if eig.values[0] <= 0.0 || last <= threshold {
        return Err(Error::SingularGram {
            eigenvalue: last,
            threshold,
        });
    }
    let inv: Vec<f64> = eig.values.iter().take(rank).map(|l| 1.0 / l).collect();
    Ok(EmbeddingMatrix {
        values: spectral_metric(&eig.vectors, &inv),
        rank,
        kind: EmbeddingKind::Pcr(rank),
    })
}

/// Row-wise map applied to attention scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Identity,
    Softmax,
    NormalizedRelu,
    /// ELU with slope parameter `nu` on the negative side, row-normalized.
    NormalizedElu { nu: f64 },
}

impl Activation {
    pub fn name(&self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Softmax => "softmax",
            Activation::NormalizedRelu => "relu",
            Activation::NormalizedElu { .. } => "elu",
        }
    }

    pub fn is_normalized(&self) -> bool {
        !matches!(self, Activation::Identity)
    }
}

/// An activation plus a temperature that divides scores beforehand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationKind {
    pub tag: Activation,
    pub temperature: f64,
}

impl ActivationKind {
    pub fn new(tag: Activation) -> Self {
        Self {
            tag,
            temperature: 1.0,
        }
    }

    pub fn identity() -> Self {
        Self::new(Activation::Identity)
    }

    pub fn softmax() -> Self {
        Self::new(Activation::Softmax)
    }

    pub fn relu() -> Self {
        Self::new(Activation::NormalizedRelu)
    }

    pub fn elu(nu: f64) -> Self {
        Self::new(Activation::NormalizedElu { nu })
    }

    /// `1/√P` scaling of the classic scaled dot-product attention.
    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if let Activation::NormalizedElu { nu } = self.tag {
            if !(nu > 0.0 && nu.is_finite()) {
                return Err(Error::InvalidArgument(format!("ELU nu must be positive, got {nu}")));
            }
        }
        Ok(())
    }

    /// Applies the activation to one row of (already temperature-scaled)
    /// scores. Returns the row normalizer on failure.
    pub fn apply_row(&self, row: &mut [f64]) -> std::result::Result<(), f64> {
        match self.tag {
            Activation::Identity => Ok(()),
            Activation::Softmax => {
                softmax_in_place(row);
                Ok(())
            }
            Activation::NormalizedRelu => {
                row.iter_mut().for_each(|v| *v = v.max(0.0));
                normalize(row)
            }
            Activation::NormalizedElu { nu } => {
                row.iter_mut()
                    .for_each(|v| *v = if *v > 0.0 { *v } else { nu * v.exp_m1() });
                normalize(row)
            }
        }
    }
}

fn normalize(row: &mut [f64]) -> std::result::Result<(), f64> {
    let total: f64 = row.iter().sum();
    if !(total.abs() > MIN_NORMALIZER) {
        return Err(total);
    }
    row.iter_mut().for_each(|v| *v /= total);
    Ok(())
}

/// Numerically stable softmax; entries equal to `-inf` receive zero weight.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    let inv = 1.0 / total;
    row.iter_mut().for_each(|v| *v *= inv);
}

/// Attention weights `g(X_query Ω X_key' / temperature)`, one row per query.
pub fn attention_weights(
    x_query: &DesignMatrix,
    x_key: &DesignMatrix,
    omega: &EmbeddingMatrix,
    activation: &ActivationKind,
) -> Result<DMatrix<f64>> {
    activation.validate()?;
    x_query.check_cols(omega.dim(), "query design")?;
    x_key.check_cols(omega.dim(), "key design")?;
    let scores = x_query.values() * &omega.values * x_key.values().transpose();
    // row-major buffer
    let (j, n) = scores.shape();
    let mut buf = scores.transpose();
    for (row, chunk) in buf.as_mut_slice().chunks_mut(n).enumerate() {
        if activation.temperature != 1.0 {
            chunk.iter_mut().for_each(|v| *v /= activation.temperature);
        }
        activation
            .apply_row(chunk)
            .map_err(|normalizer| Error::DegenerateRow { row, normalizer })?;
    }
    let weights = buf.transpose();
    debug_assert_eq!(weights.shape(), (j, n));
    Ok(weights)
}

/// `attention_weights(..) · y`.
pub fn linear_attention_predict(
    x_query: &DesignMatrix,
    x_key: &DesignMatrix,
    y: &DVector<f64>,
    omega: &EmbeddingMatrix,
    activation: &ActivationKind,
) -> Result<DVector<f64>> {
    if y.len() != x_key.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} outcomes for {} keys",
            y.len(),
            x_key.nrows()
        )));
    }
    let weights = attention_weights(x_query, x_key, omega, activation)?;
    Ok(weights * y)
}
