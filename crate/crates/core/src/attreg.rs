//! Multi-head attention regression.
//!
//! Predictions are a combination of `M` softmax attention heads over the
//! training outcomes,
//!
//! ```text
//! ŷ = Σ_m α_m · softmax(X_query L_m L_m' X_train') y_train,
//! ```
//!
//! where each metric is parameterized through a lower-triangular factor
//! `L_m` so that `Ω_m = L_m L_m'` is positive semi-definite. Parameters are
//! fit by L-BFGS on
//!
//! ```text
//! ‖y - ŷ(X_train)‖² + λ Σ_m ‖L_m‖_F²
//! ```
//!
//! starting from `√N · chol((X'X + λI)^{-1})` plus a little Gaussian noise per
//! head.

use std::cell::RefCell;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::attention::softmax_in_place;
use crate::linalg::DesignMatrix;
use crate::optim::{self, LbfgsConfig, Objective, StopReason};
use crate::{fmt_f64, Error, Result};

const FORMAT_HEADER: &str = "olsatt-attreg";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct AttRegConfig {
    pub heads: usize,
    pub ridge_penalty: f64,
    pub init_noise_scale: f64,
    pub max_iterations: usize,
    pub improvement_tol: f64,
    pub patience: usize,
    /// Exclude each training point from its own attention row.
    pub diagonal_mask: bool,
    pub seed: u64,
}

impl Default for AttRegConfig {
    fn default() -> Self {
        Self {
            heads: 5,
            ridge_penalty: 1e-3,
            init_noise_scale: 0.01,
            max_iterations: 500,
            improvement_tol: 1e-6,
            patience: 10,
            diagonal_mask: false,
            seed: 0,
        }
    }
}

impl AttRegConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.heads == 0 {
            return bad("at least one head is required");
        }
        if !(self.ridge_penalty >= 0.0 && self.ridge_penalty.is_finite()) {
            return bad("ridge penalty must be finite and nonnegative");
        }
        if !(self.init_noise_scale >= 0.0 && self.init_noise_scale.is_finite()) {
            return bad("initial noise scale must be finite and nonnegative");
        }
        if self.max_iterations == 0 || self.patience == 0 {
            return bad("max_iterations and patience must be positive");
        }
        Ok(())
    }
}

/// One attention head: a lower-triangular factor and a combination weight.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionHead {
    pub factor: DMatrix<f64>,
    pub alpha: f64,
}

impl AttentionHead {
    pub fn new(factor: DMatrix<f64>, alpha: f64) -> Result<Self> {
        if !factor.is_square() {
            return Err(Error::DimensionMismatch("head factor must be square".into()));
        }
        let p = factor.nrows();
        for i in 0..p {
            for j in (i + 1)..p {
                if factor[(i, j)] != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "head factor has a nonzero entry above the diagonal at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { factor, alpha })
    }

    /// `Ω = L L'`.
    pub fn metric(&self) -> DMatrix<f64> {
        &self.factor * self.factor.transpose()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
    /// Loss at the start and at every accepted iterate.
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadModel {
    pub heads: Vec<AttentionHead>,
    pub train_x: DesignMatrix,
    pub train_y: DVector<f64>,
    pub config: AttRegConfig,
    pub diagnostics: Option<Diagnostics>,
}

/// Gradient of the loss with respect to one head.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradient {
    /// Lower triangular; entries above the diagonal are exactly zero.
    pub factor: DMatrix<f64>,
    pub alpha: f64,
}

fn lower_len(p: usize) -> usize {
    p * (p + 1) / 2
}

impl MultiHeadModel {
    pub fn new(
        heads: Vec<AttentionHead>,
        train_x: DesignMatrix,
        train_y: DVector<f64>,
        config: AttRegConfig,
    ) -> Result<Self> {
        if heads.is_empty() {
            return Err(Error::InvalidArgument("model needs at least one head".into()));
        }
        if train_x.nrows() != train_y.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} outcomes for {} observations",
                train_y.len(),
                train_x.nrows()
            )));
        }
        if train_y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("training outcomes".into()));
        }
        let p = train_x.ncols();
        if let Some(h) = heads.iter().find(|h| h.factor.nrows() != p) {
            return Err(Error::DimensionMismatch(format!(
                "head factor is {}x{}, predictors {p}",
                h.factor.nrows(),
                h.factor.ncols()
            )));
        }
        Ok(Self {
            heads,
            train_x,
            train_y,
            config,
            diagnostics: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.train_x.ncols()
    }

    /// Flat parameters: per head, the lower triangle row by row, then `α`.
    pub fn params(&self) -> Vec<f64> {
        let p = self.dim();
        let mut out = Vec::with_capacity(self.heads.len() * (lower_len(p) + 1));
        for h in &self.heads {
            for i in 0..p {
                for j in 0..=i {
                    out.push(h.factor[(i, j)]);
                }
            }
            out.push(h.alpha);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) {
        let p = self.dim();
        let stride = lower_len(p) + 1;
        assert_eq!(params.len(), stride * self.heads.len());
        for (h, chunk) in self.heads.iter_mut().zip(params.chunks(stride)) {
            let mut idx = 0;
            for i in 0..p {
                for j in 0..=i {
                    h.factor[(i, j)] = chunk[idx];
                    idx += 1;
                }
            }
            h.alpha = chunk[idx];
        }
    }

    fn engine(&self) -> Engine {
        Engine::new(&self.train_x, &self.train_y, self.config.ridge_penalty)
    }

    fn aliases_training(&self, x_query: &DesignMatrix) -> bool {
        std::ptr::eq(x_query, &self.train_x) || x_query.values() == self.train_x.values()
    }

    /// `Σ_m α_m softmax(X_query Ω_m X_train') y`. With `diagonal_mask` set and
    /// the query equal to the training design, self-scores are excluded.
    pub fn forward(&self, x_query: &DesignMatrix) -> Result<DVector<f64>> {
        x_query.check_cols(self.dim(), "query design")?;
        let mask = self.config.diagonal_mask && self.aliases_training(x_query);
        let engine = self.engine();
        let params = self.params();
        Ok(DVector::from_vec(engine.predict(&params, x_query.values(), mask)))
    }

    pub fn predict(&self, x_test: &DesignMatrix) -> Result<DVector<f64>> {
        self.forward(x_test)
    }

    /// In-sample fitted values (masked when configured).
    pub fn fitted(&self) -> DVector<f64> {
        let engine = self.engine();
        DVector::from_vec(engine.predict(
            &self.params(),
            self.train_x.values(),
            self.config.diagonal_mask,
        ))
    }

    pub fn loss(&self) -> f64 {
        let engine = self.engine();
        engine.evaluate(&self.params(), self.config.diagonal_mask, false).0
    }

    pub fn loss_gradient(&self) -> Vec<HeadGradient> {
        let p = self.dim();
        let engine = self.engine();
        let (_, flat) = engine.evaluate(&self.params(), self.config.diagonal_mask, true);
        let stride = lower_len(p) + 1;
        flat.chunks(stride)
            .map(|chunk| {
                let mut factor = DMatrix::zeros(p, p);
                let mut idx = 0;
                for i in 0..p {
                    for j in 0..=i {
                        factor[(i, j)] = chunk[idx];
                        idx += 1;
                    }
                }
                HeadGradient {
                    factor,
                    alpha: chunk[idx],
                }
            })
            .collect()
    }

    /// Text dump: format version, dimensions, config, every head's lower
    /// triangle (row-major) and `α`, then the retained training data.
    /// Floats carry 17 significant digits and parse back bit-exactly.
    pub fn to_text(&self) -> String {
        let p = self.dim();
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(s, "{FORMAT_HEADER} {FORMAT_VERSION}");
        let _ = writeln!(s, "p {p}");
        let _ = writeln!(s, "m {}", self.heads.len());
        let _ = writeln!(s, "n {}", self.train_x.nrows());
        let _ = writeln!(s, "heads {}", c.heads);
        let _ = writeln!(s, "ridge_penalty {}", fmt_f64(c.ridge_penalty));
        let _ = writeln!(s, "init_noise_scale {}", fmt_f64(c.init_noise_scale));
        let _ = writeln!(s, "max_iterations {}", c.max_iterations);
        let _ = writeln!(s, "improvement_tol {}", fmt_f64(c.improvement_tol));
        let _ = writeln!(s, "patience {}", c.patience);
        let _ = writeln!(s, "diagonal_mask {}", c.diagonal_mask);
        let _ = writeln!(s, "seed {}", c.seed);
        for h in &self.heads {
            let _ = writeln!(s, "alpha {}", fmt_f64(h.alpha));
            let tri: Vec<String> = (0..p)
                .flat_map(|i| (0..=i).map(move |j| (i, j)))
                .map(|(i, j)| fmt_f64(h.factor[(i, j)]))
                .collect();
            let _ = writeln!(s, "factor {}", tri.join(" "));
        }
        let x = self.train_x.values();
        for i in 0..x.nrows() {
            let row: Vec<String> = (0..p).map(|k| fmt_f64(x[(i, k)])).collect();
            let _ = writeln!(s, "row {} {}", row.join(" "), fmt_f64(self.train_y[i]));
        }
        s.push_str("end\n");
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let err = |line: usize, message: String| Error::Parse { line, message };

        let (ln, header) = lines.next().ok_or_else(|| err(0, "empty model".into()))?;
        let version = header
            .strip_prefix(FORMAT_HEADER)
            .map(str::trim)
            .ok_or_else(|| err(ln, format!("expected '{FORMAT_HEADER}' header")))?;
        if version != FORMAT_VERSION.to_string() {
            return Err(err(ln, format!("unsupported format version '{version}'")));
        }

        let mut next_field = |key: &str| -> Result<(usize, String)> {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| err(0, format!("missing '{key}'")))?;
            let rest = line
                .strip_prefix(key)
                .filter(|r| r.starts_with(' ') || r.is_empty())
                .ok_or_else(|| err(ln, format!("expected '{key}', found '{line}'")))?;
            Ok((ln, rest.trim().to_string()))
        };
        fn num<T: std::str::FromStr>(ln: usize, s: &str) -> Result<T> {
            s.parse().map_err(|_| Error::Parse {
                line: ln,
                message: format!("invalid number '{s}'"),
            })
        }

        let (ln, v) = next_field("p")?;
        let p: usize = num(ln, &v)?;
        let (ln, v) = next_field("m")?;
        let m: usize = num(ln, &v)?;
        let (ln, v) = next_field("n")?;
        let n: usize = num(ln, &v)?;
        let mut config = AttRegConfig::default();
        let (ln, v) = next_field("heads")?;
        config.heads = num(ln, &v)?;
        let (ln, v) = next_field("ridge_penalty")?;
        config.ridge_penalty = num(ln, &v)?;
        let (ln, v) = next_field("init_noise_scale")?;
        config.init_noise_scale = num(ln, &v)?;
        let (ln, v) = next_field("max_iterations")?;
        config.max_iterations = num(ln, &v)?;
        let (ln, v) = next_field("improvement_tol")?;
        config.improvement_tol = num(ln, &v)?;
        let (ln, v) = next_field("patience")?;
        config.patience = num(ln, &v)?;
        let (ln, v) = next_field("diagonal_mask")?;
        config.diagonal_mask = num(ln, &v)?;
        let (ln, v) = next_field("seed")?;
        config.seed = num(ln, &v)?;

        let mut heads = Vec::with_capacity(m);
        for _ in 0..m {
            let (ln, v) = next_field("alpha")?;
            let alpha: f64 = num(ln, &v)?;
            let (ln, v) = next_field("factor")?;
            let values: Vec<f64> = v
                .split_whitespace()
                .map(|t| num(ln, t))
                .collect::<Result<_>>()?;
            if values.len() != lower_len(p) {
                return Err(err(ln, format!("expected {} factor entries", lower_len(p))));
            }
            let mut factor = DMatrix::zeros(p, p);
            let mut idx = 0;
            for i in 0..p {
                for j in 0..=i {
                    factor[(i, j)] = values[idx];
                    idx += 1;
                }
            }
            heads.push(AttentionHead::new(factor, alpha)?);
        }
        let mut xs = Vec::with_capacity(n * p);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let (ln, v) = next_field("row")?;
            let values: Vec<f64> = v
                .split_whitespace()
                .map(|t| num(ln, t))
                .collect::<Result<_>>()?;
            if values.len() != p + 1 {
                return Err(err(ln, format!("expected {} row values", p + 1)));
            }
            xs.extend_from_slice(&values[..p]);
            ys.push(values[p]);
        }
        let (ln, _) = next_field("end")?;
        let _ = ln;
        let train_x = DesignMatrix::from_row_slice(n, p, &xs)?;
        Self::new(heads, train_x, DVector::from_vec(ys), config)
    }
}

/// Loss and gradient evaluation over flat parameters.
///
/// For training queries `exp(s_ij) = E_ij exp(d_i) exp(d_j)` with
/// `d_i = s_ii / 2` and `E_ij = exp(s_ij - d_i - d_j) ≤ 1` (Ω is PSD). `E` is
/// symmetric, so only half of the exponentials are evaluated. The row factor
/// cancels in the softmax and the column factor is folded into
/// `R = E diag(exp(d - max d)) [1, y, X, y∘X]`, which carries the normalizers,
/// the head predictions and everything the gradient needs. Rows whose mass
/// underflows are recomputed with the row maximum subtracted.
struct Engine {
    x: DMatrix<f64>,
    y: DVector<f64>,
    /// `[1, y, X, y∘X]`
    q: DMatrix<f64>,
    lambda: f64,
    scratch: RefCell<DMatrix<f64>>,
}

/// Rows whose normalizer falls below this are recomputed with the row
/// maximum subtracted.
const MIN_ROW_MASS: f64 = 1e-250;

struct HeadPass {
    /// Columns of `E [1, y, X, y∘X]`.
    r: DMatrix<f64>,
    h: DVector<f64>,
}

impl Engine {
    fn new(x: &DesignMatrix, y: &DVector<f64>, lambda: f64) -> Self {
        let x = x.values().clone();
        let (n, p) = x.shape();
        let mut q = DMatrix::zeros(n, 2 + 2 * p);
        q.column_mut(0).fill(1.0);
        q.set_column(1, y);
        for k in 0..p {
            q.set_column(2 + k, &x.column(k));
            q.set_column(2 + p + k, &x.column(k).component_mul(y));
        }
        Self {
            x,
            y: y.clone(),
            q,
            lambda,
            scratch: RefCell::new(DMatrix::zeros(0, 0)),
        }
    }

    fn p(&self) -> usize {
        self.x.ncols()
    }

    fn heads(&self, params: &[f64]) -> Vec<(DMatrix<f64>, f64)> {
        let p = self.p();
        let stride = lower_len(p) + 1;
        params
            .chunks(stride)
            .map(|chunk| {
                let mut l = DMatrix::zeros(p, p);
                let mut idx = 0;
                for i in 0..p {
                    for j in 0..=i {
                        l[(i, j)] = chunk[idx];
                        idx += 1;
                    }
                }
                (l, chunk[idx])
            })
            .collect()
    }

    fn head_pass(&self, l: &DMatrix<f64>, mask: bool) -> HeadPass {
        let n = self.x.nrows();
        let z = &self.x * l;
        let zt = z.transpose();
        let mut e = self.scratch.borrow_mut();
        if e.shape() != (n, n) {
            *e = DMatrix::zeros(n, n);
        }
        z.mul_to(&zt, &mut e);
        let d: Vec<f64> = (0..n).map(|i| 0.5 * e[(i, i)]).collect();
        {
            let buf = e.as_mut_slice();
            for j in 0..n {
                let col = &mut buf[j * n..j * n + j + 1];
                let dj = d[j];
                for (v, di) in col[..j].iter_mut().zip(&d) {
                    *v = (*v - di - dj).exp();
                }
                col[j] = if mask { 0.0 } else { 1.0 };
            }
            for j in 0..n {
                for i in 0..j {
                    buf[i * n + j] = buf[j * n + i];
                }
            }
        }
        // row i of softmax(S) is proportional to E_ij exp(d_j), shifted by max d
        let d_max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut q = self.q.clone();
        for (i, mut row) in q.row_iter_mut().enumerate() {
            row *= (d[i] - d_max).exp();
        }
        let mut r = &*e * &q;
        {
            let mut row = vec![0.0; n];
            for i in 0..n {
                if r[(i, 0)] >= MIN_ROW_MASS || (mask && n < 2) {
                    continue;
                }
                for (j, s) in row.iter_mut().enumerate() {
                    *s = if mask && j == i {
                        f64::NEG_INFINITY
                    } else {
                        z.row(i).dot(&z.row(j))
                    };
                }
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                row.iter_mut().for_each(|s| *s = (*s - max).exp());
                for c in 0..self.q.ncols() {
                    r[(i, c)] = row.iter().zip(self.q.column(c).iter()).map(|(a, b)| a * b).sum();
                }
            }
        }
        let h = r.column(1).component_div(&r.column(0));
        HeadPass { r, h }
    }

    /// Softmax attention of arbitrary queries against the training keys.
    fn predict(&self, params: &[f64], x_query: &DMatrix<f64>, mask: bool) -> Vec<f64> {
        let n = self.x.nrows();
        let mut out = DVector::zeros(x_query.nrows());
        for (l, alpha) in self.heads(params) {
            let keys = (&self.x * &l).transpose();
            let mut s = (x_query * &l) * keys;
            for i in 0..s.nrows() {
                let mut row: Vec<f64> = s.row(i).iter().copied().collect();
                if mask && n > 1 {
                    row[i] = f64::NEG_INFINITY;
                }
                softmax_in_place(&mut row);
                for (j, v) in row.into_iter().enumerate() {
                    s[(i, j)] = v;
                }
            }
            out += (s * &self.y) * alpha;
        }
        out.iter().copied().collect()
    }

    /// Penalized loss and, when requested, its gradient in flat layout.
    fn evaluate(&self, params: &[f64], mask: bool, with_gradient: bool) -> (f64, Vec<f64>) {
        let p = self.p();
        let heads = self.heads(params);
        let passes: Vec<HeadPass> = heads.iter().map(|(l, _)| self.head_pass(l, mask)).collect();
        let mut resid = self.y.clone();
        for ((_, alpha), pass) in heads.iter().zip(&passes) {
            resid.axpy(-alpha, &pass.h, 1.0);
        }
        let penalty: f64 = heads.iter().map(|(l, _)| l.norm_squared()).sum();
        let loss = resid.norm_squared() + self.lambda * penalty;
        if !with_gradient {
            return (loss, Vec::new());
        }

        let mut grad = Vec::with_capacity(params.len());
        for ((l, alpha), pass) in heads.iter().zip(&passes) {
            // v_i = w_i (Σ_j E_ij y_j x_j - h_i Σ_j E_ij x_j), w_i = -2 α r_i / Z_i
            let mut v = pass.r.columns(2 + p, p).into_owned();
            for i in 0..v.nrows() {
                let w = -2.0 * alpha * resid[i] / pass.r[(i, 0)];
                let hi = pass.h[i];
                for k in 0..p {
                    v[(i, k)] = w * (v[(i, k)] - hi * pass.r[(i, 2 + k)]);
                }
            }
            let g_omega = self.x.tr_mul(&v);
            let g_l = (&g_omega + g_omega.transpose()) * l + l * (2.0 * self.lambda);
            for i in 0..p {
                for j in 0..=i {
                    grad.push(g_l[(i, j)]);
                }
            }
            grad.push(-2.0 * resid.dot(&pass.h));
        }
        (loss, grad)
    }
}

struct TrainingObjective {
    engine: Engine,
    mask: bool,
}

impl Objective for TrainingObjective {
    fn value(&self, x: &[f64]) -> f64 {
        self.engine.evaluate(x, self.mask, false).0
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.engine.evaluate(x, self.mask, true).1
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.engine.evaluate(x, self.mask, true)
    }
}

/// Ridge-anchored starting heads.
///
/// Every head starts from `√N · chol((X'X + λI)^{-1})`; independent
/// `N(0, s²)` noise with `s = init_noise_scale · ‖L_base‖_F / P` is added to
/// the lower triangle. All `α_m = 1/M`.
pub fn init_heads(x_train: &DesignMatrix, config: &AttRegConfig) -> Result<Vec<AttentionHead>> {
    config.validate()?;
    let p = x_train.ncols();
    let base = base_factor(x_train, config.ridge_penalty)?;
    let sd = config.init_noise_scale * base.norm() / p as f64;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let alpha = 1.0 / config.heads as f64;
    (0..config.heads)
        .map(|_| {
            let mut factor = base.clone();
            for i in 0..p {
                for j in 0..=i {
                    let e: f64 = rng.sample(StandardNormal);
                    factor[(i, j)] += sd * e;
                }
            }
            AttentionHead::new(factor, alpha)
        })
        .collect()
}

/// `√N · chol((X'X + λI)^{-1})`.
pub fn base_factor(x_train: &DesignMatrix, lambda: f64) -> Result<DMatrix<f64>> {
    let p = x_train.ncols();
    let a = x_train.gram() + DMatrix::identity(p, p) * lambda;
    let singular = || Error::SingularGram {
        eigenvalue: 0.0,
        threshold: 0.0,
    };
    let precision = a.cholesky().ok_or_else(singular)?.inverse();
    let precision = (&precision + precision.transpose()) * 0.5;
    let l = precision.cholesky().ok_or_else(singular)?.unpack();
    Ok(l * (x_train.nrows() as f64).sqrt())
}

/// Fits the multi-head model by L-BFGS from the ridge-anchored start.
pub fn fit(x_train: &DesignMatrix, y: &DVector<f64>, config: &AttRegConfig) -> Result<MultiHeadModel> {
    config.validate()?;
    if x_train.nrows() < 2 {
        return Err(Error::InvalidArgument("need at least two observations".into()));
    }
    let heads = init_heads(x_train, config)?;
    let mut model = MultiHeadModel::new(heads, x_train.clone(), y.clone(), config.clone())?;
    let objective = TrainingObjective {
        engine: model.engine(),
        mask: config.diagonal_mask,
    };
    let lbfgs = LbfgsConfig {
        max_iterations: config.max_iterations,
        ..LbfgsConfig::default()
    };
    let result = optim::minimize(
        &objective,
        &model.params(),
        &lbfgs,
        config.improvement_tol,
        config.patience,
    )
    .map_err(|e| Error::OptimizationFailed(e.to_string()))?;
    model.set_params(&result.solution);
    model.diagnostics = Some(Diagnostics {
        initial_loss: result.history[0].value,
        final_loss: result.value,
        iterations: result.iterations,
        stop_reason: result.stop_reason,
        loss_history: result.history.iter().map(|r| r.value).collect(),
    });
    Ok(model)
}

pub fn forward(model: &MultiHeadModel, x_query: &DesignMatrix) -> Result<DVector<f64>> {
    model.forward(x_query)
}

pub fn predict(model: &MultiHeadModel, x_test: &DesignMatrix) -> Result<DVector<f64>> {
    model.predict(x_test)
}

pub fn loss(model: &MultiHeadModel) -> f64 {
    model.loss()
}

pub fn loss_gradient(model: &MultiHeadModel) -> Vec<HeadGradient> {
    model.loss_gradient()
}
