//! Spectral embedding of the predictor gram matrix and the proximity form of
//! least squares.
//!
//! With `X'X = U Λ U'` and `W = U Λ^{-1/2}`, the factor scores `F = X W` of
//! the training design are orthonormal, and OLS predictions become inner
//! products between test and training scores:
//!
//! ```text
//! ŷ_test = X_test β̂ = (X_test W)(X_train W)' y = F_test F_train' y
//! ```
//!
//! Row `j` of `F_test F_train'` is the vector of proximity weights the
//! prediction for test point `j` places on each training outcome.

use nalgebra::{DMatrix, DVector};

use crate::attention::Activation;
use crate::{Error, Result};

/// Default relative tolerance for symmetry and positive-definiteness checks.
pub const DEFAULT_TOL: f64 = 1e-10;

/// A dense design matrix (rows = observations, columns = predictors).
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    has_intercept: bool,
}

impl DesignMatrix {
    /// Wraps a matrix, checking that it is non-empty and finite.
    ///
    /// `has_intercept` is set when some column is a nonzero constant.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "design matrix must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::NonFinite(format!("design entry ({r}, {c})")));
        }
        let has_intercept = values.column_iter().any(|col| {
            let first = col[0];
            first != 0.0 && col.iter().all(|&v| v == first)
        });
        Ok(Self {
            values,
            has_intercept,
        })
    }

    /// Builds a design from row-major data.
    pub fn from_row_slice(nrows: usize, ncols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::DimensionMismatch(format!(
                "{} values cannot fill a {nrows}x{ncols} matrix",
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(nrows, ncols, data))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch(format!(
                "row {i} has {} columns, expected {ncols}",
                rows[i].len()
            )));
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_slice(rows.len(), ncols, &data)
    }

    /// Returns a copy with a column of ones prepended.
    pub fn with_intercept(&self) -> Self {
        let n = self.nrows();
        let values = self.values.clone().insert_column(0, 1.0);
        debug_assert_eq!(values.nrows(), n);
        Self {
            values,
            has_intercept: true,
        }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn has_intercept(&self) -> bool {
        self.has_intercept
    }

    /// `X'X`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.values.tr_mul(&self.values)
    }

    pub(crate) fn check_cols(&self, expected: usize, what: &str) -> Result<()> {
        if self.ncols() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{what} has {} columns, expected {expected}",
                self.ncols()
            )));
        }
        Ok(())
    }
}

/// Eigenvalues in descending order with sign-normalized eigenvectors.
#[derive(Debug, Clone)]
pub(crate) struct SortedEigen {
    pub vectors: DMatrix<f64>,
    pub values: DVector<f64>,
}

/// Symmetric eigendecomposition with deterministic ordering and signs.
///
/// Eigenvalues are sorted descending (stable with respect to the solver's
/// order for ties) and each eigenvector is flipped so that its
/// largest-magnitude entry is positive.
pub(crate) fn sorted_eigen(gram: &DMatrix<f64>, tol: f64) -> Result<SortedEigen> {
    if !gram.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "gram must be square, got {}x{}",
            gram.nrows(),
            gram.ncols()
        )));
    }
    if gram.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gram matrix".into()));
    }
    let scale = gram.amax().max(1.0);
    let asymmetry = (gram - gram.transpose()).amax();
    if asymmetry > tol * scale {
        return Err(Error::NonSymmetric { asymmetry });
    }
    let sym = (gram + gram.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);

    let p = gram.nrows();
    let mut order: Vec<usize> = (0..p).collect();
    // stable sort keeps solver order among ties
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut vectors = DMatrix::zeros(p, p);
    let mut values = DVector::zeros(p);
    for (k, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let pivot = col.iamax();
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(k, &col);
        values[k] = eig.eigenvalues[src];
    }
    Ok(SortedEigen { vectors, values })
}

/// Eigenvectors `U`, eigenvalues `Λ` (descending) and the whitening map
/// `W = U Λ^{-1/2}` of a strictly positive definite gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    pub eigenvectors: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
    pub embedding: DMatrix<f64>,
}

impl SpectralEmbedding {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `U Λ^{-1} U'`, the inverse of the source gram.
    pub fn inverse(&self) -> DMatrix<f64> {
        &self.embedding * self.embedding.transpose()
    }
}

/// Decomposes `gram = U Λ U'` and forms `W = U Λ^{-1/2}`.
///
/// `tol` is relative: the gram is rejected as non-symmetric when the largest
/// asymmetry exceeds `tol · max(1, max|g|)`, and as singular when the
/// smallest eigenvalue is at most `tol · λ_max`.
pub fn spectral_embedding(gram: &DMatrix<f64>, tol: f64) -> Result<SpectralEmbedding> {
    let SortedEigen { vectors, values } = sorted_eigen(gram, tol)?;
    let p = values.len();
    let largest = values[0];
    let threshold = tol * largest.max(0.0);
    let smallest = values[p - 1];
    if largest <= 0.0 || smallest <= threshold {
        return Err(Error::SingularGram {
            eigenvalue: smallest,
            threshold,
        });
    }
    let inv_sqrt = values.map(|l| 1.0 / l.sqrt());
    let mut embedding = vectors.clone();
    for (k, mut col) in embedding.column_iter_mut().enumerate() {
        col *= inv_sqrt[k];
    }
    Ok(SpectralEmbedding {
        eigenvectors: vectors,
        eigenvalues: values,
        embedding,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreOrigin {
    Train,
    Test,
}

/// Observations expressed in the spectral-embedding basis, `F = X W`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorScores {
    pub values: DMatrix<f64>,
    pub origin: ScoreOrigin,
}

pub fn factor_scores(
    x: &DesignMatrix,
    emb: &SpectralEmbedding,
    origin: ScoreOrigin,
) -> Result<FactorScores> {
    x.check_cols(emb.dim(), "design")?;
    Ok(FactorScores {
        values: x.values() * &emb.embedding,
        origin,
    })
}

/// A `J × N` matrix of weights placed by each query on each stored outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityWeights {
    pub values: DMatrix<f64>,
    pub activation: Activation,
}

impl ProximityWeights {
    pub fn row_sums(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.values.nrows(),
            self.values.row_iter().map(|r| r.sum()),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: DVector<f64>,
    pub gram: DMatrix<f64>,
    pub embedding: SpectralEmbedding,
}

impl OlsFit {
    /// Direct predictions `X β̂`.
    pub fn predict(&self, x: &DesignMatrix) -> Result<DVector<f64>> {
        x.check_cols(self.coefficients.len(), "design")?;
        Ok(x.values() * &self.coefficients)
    }
}

fn check_outcomes(x: &DesignMatrix, y: &DVector<f64>) -> Result<()> {
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} outcomes for {} observations",
            y.len(),
            x.nrows()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("outcome vector".into()));
    }
    Ok(())
}

/// `β̂ = (X'X)^{-1} X'y`, computed through the spectral embedding.
pub fn ols_fit(x_train: &DesignMatrix, y: &DVector<f64>) -> Result<OlsFit> {
    check_outcomes(x_train, y)?;
    if x_train.nrows() < x_train.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "need at least as many observations as predictors ({} < {})",
            x_train.nrows(),
            x_train.ncols()
        )));
    }
    let gram = x_train.gram();
    let embedding = spectral_embedding(&gram, DEFAULT_TOL)?;
    let xty = x_train.values().tr_mul(y);
    let w = &embedding.embedding;
    let coefficients = w * (w.tr_mul(&xty));
    Ok(OlsFit {
        coefficients,
        gram,
        embedding,
    })
}

/// OLS predictions in attention form, `F_test F_train' y`, together with the
/// proximity weights `F_test F_train'`.
pub fn ols_predict_attention(
    x_test: &DesignMatrix,
    x_train: &DesignMatrix,
    y: &DVector<f64>,
) -> Result<(DVector<f64>, ProximityWeights)> {
    check_outcomes(x_train, y)?;
    x_test.check_cols(x_train.ncols(), "test design")?;
    let emb = spectral_embedding(&x_train.gram(), DEFAULT_TOL)?;
    let f_test = factor_scores(x_test, &emb, ScoreOrigin::Test)?;
    let f_train = factor_scores(x_train, &emb, ScoreOrigin::Train)?;
    let weights = &f_test.values * f_train.values.transpose();
    let predictions = &weights * y;
    Ok((
        predictions,
        ProximityWeights {
            values: weights,
            activation: Activation::Identity,
        },
    ))
}

/// Splits an inner-product weight into a scale and an alignment term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightDecomposition {
    /// `‖f_query‖ · ‖f_key‖`
    pub scale: f64,
    /// Cosine of the angle between the two vectors; 0 if either is zero.
    pub cosine: f64,
    /// The raw inner product.
    pub weight: f64,
}

pub fn weight_decomposition(f_query: &[f64], f_key: &[f64]) -> Result<WeightDecomposition> {
    if f_query.len() != f_key.len() {
        return Err(Error::DimensionMismatch(format!(
            "query has length {}, key has length {}",
            f_query.len(),
            f_key.len()
        )));
    }
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let weight: f64 = f_query.iter().zip(f_key).map(|(a, b)| a * b).sum();
    let scale = norm(f_query) * norm(f_key);
    let cosine = if scale > 0.0 { weight / scale } else { 0.0 };
    Ok(WeightDecomposition {
        scale,
        cosine,
        weight,
    })
}
