//! Estimators shared by `fit`, `predict` and `bench`, and the model artifact.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use olsatt::attention::{pcr_embedding, ridge_embedding};
use olsatt::attreg::{self, AttRegConfig, MultiHeadModel};
use olsatt::linalg::ols_fit;
use olsatt::{fmt_f64, DesignMatrix};

use crate::error::{CliError, CliResult};

pub const DEFAULT_RIDGE_LAMBDA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Ols,
    Ridge(f64),
    Pcr(usize),
    AttReg(AttRegConfig),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Ols => "ols",
            Method::Ridge(_) => "ridge",
            Method::Pcr(_) => "pcr",
            Method::AttReg(_) => "attreg",
        }
    }

    /// Name plus its tuning value, e.g. `ridge:1` or `pcr:3`.
    pub fn label(&self) -> String {
        match self {
            Method::Ridge(l) => format!("ridge:{l}"),
            Method::Pcr(r) => format!("pcr:{r}"),
            m => m.name().to_string(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// A method name as typed by the user, before defaults are filled in.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodSpec {
    Ols,
    Ridge(Option<f64>),
    Pcr(Option<usize>),
    AttReg,
}

impl FromStr for MethodSpec {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s.as_str(), None),
        };
        let bad = |what: &str| CliError::Usage(format!("invalid {what} in method '{s}'"));
        match (name, arg) {
            ("ols", None) => Ok(MethodSpec::Ols),
            ("attreg", None) => Ok(MethodSpec::AttReg),
            ("ridge", a) => a
                .map(|v| v.parse::<f64>().map_err(|_| bad("penalty")))
                .transpose()
                .map(MethodSpec::Ridge),
            ("pcr", a) => a
                .map(|v| v.parse::<usize>().map_err(|_| bad("rank")))
                .transpose()
                .map(MethodSpec::Pcr),
            _ => Err(CliError::Usage(format!(
                "unknown method '{s}' (expected ols, ridge[:λ], pcr[:L] or attreg)"
            ))),
        }
    }
}

impl MethodSpec {
    /// `lambda` is the ridge penalty for ridge and attreg when not given
    /// inline; PCR needs a rank from `pcr:L` or `rank`.
    pub fn resolve(&self, lambda: Option<f64>, rank: Option<usize>, attreg: &AttRegConfig) -> CliResult<Method> {
        Ok(match self {
            MethodSpec::Ols => Method::Ols,
            MethodSpec::Ridge(l) => Method::Ridge(l.or(lambda).unwrap_or(DEFAULT_RIDGE_LAMBDA)),
            MethodSpec::Pcr(r) => Method::Pcr(r.or(rank).ok_or_else(|| {
                CliError::Usage("pcr needs a component count (--rank or pcr:L)".into())
            })?),
            MethodSpec::AttReg => {
                let mut config = attreg.clone();
                if let Some(l) = lambda {
                    config.ridge_penalty = l;
                }
                Method::AttReg(config)
            }
        })
    }
}

/// Column centering and scaling fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Scaler {
    /// Means and sample standard deviations; constant columns keep scale 1.
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let mut center = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for c in x.column_iter() {
            let mean = c.mean();
            let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            center.push(mean);
            scale.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Self { center, scale }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, k| (x[(i, k)] - self.center[k]) / self.scale[k])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predictor {
    /// `ŷ = intercept + x'β`
    Linear {
        intercept: f64,
        coefficients: DVector<f64>,
    },
    AttReg(Box<MultiHeadModel>),
}

impl Predictor {
    pub fn predict(&self, x: &DMatrix<f64>) -> CliResult<DVector<f64>> {
        match self {
            Predictor::Linear {
                intercept,
                coefficients,
            } => {
                if x.ncols() != coefficients.len() {
                    return Err(CliError::Data(format!(
                        "expected {} predictors, got {}",
                        coefficients.len(),
                        x.ncols()
                    )));
                }
                Ok((x * coefficients).add_scalar(*intercept))
            }
            Predictor::AttReg(model) => Ok(model.predict(&DesignMatrix::new(x.clone())?)?),
        }
    }
}

fn center_columns(x: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let means = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.mean()));
    let centered = DMatrix::from_fn(x.nrows(), x.ncols(), |i, k| x[(i, k)] - means[k]);
    (centered, means)
}

/// Linear map `β = Ω X_c' y_c` on centered data, plus the matching intercept.
fn centered_linear(
    y: &DVector<f64>,
    omega: &DMatrix<f64>,
    xc: &DMatrix<f64>,
    means: &DVector<f64>,
) -> Predictor {
    let ybar = y.mean();
    let yc = y.add_scalar(-ybar);
    let beta = omega * (xc.transpose() * yc);
    Predictor::Linear {
        intercept: ybar - means.dot(&beta),
        coefficients: beta,
    }
}

/// Fits `method` on raw predictor rows `x`.
///
/// OLS adds an intercept column unless the design already has a constant
/// column. Ridge and PCR work on training-centered data, so the intercept is
/// not shrunk and components are principal directions. Attention regression
/// uses the predictors as given.
pub fn fit_method(method: &Method, x: &DMatrix<f64>, y: &DVector<f64>) -> CliResult<Predictor> {
    if x.nrows() != y.len() {
        return Err(CliError::Data(format!(
            "{} rows of predictors for {} outcomes",
            x.nrows(),
            y.len()
        )));
    }
    let design = DesignMatrix::new(x.clone())?;
    match method {
        Method::Ols => {
            if design.has_intercept() {
                let fit = ols_fit(&design, y)?;
                return Ok(Predictor::Linear {
                    intercept: 0.0,
                    coefficients: fit.coefficients,
                });
            }
            let fit = ols_fit(&design.with_intercept(), y)?;
            let c = fit.coefficients;
            Ok(Predictor::Linear {
                intercept: c[0],
                coefficients: c.rows(1, c.len() - 1).into_owned(),
            })
        }
        Method::Ridge(lambda) => {
            let (xc, means) = center_columns(x);
            let omega = ridge_embedding(&DesignMatrix::new(xc.clone())?, *lambda)?;
            Ok(centered_linear(y, &omega.values, &xc, &means))
        }
        Method::Pcr(rank) => {
            let (xc, means) = center_columns(x);
            let omega = pcr_embedding(&DesignMatrix::new(xc.clone())?, *rank)?;
            Ok(centered_linear(y, &omega.values, &xc, &means))
        }
        Method::AttReg(config) => Ok(Predictor::AttReg(Box::new(attreg::fit(&design, y, config)?))),
    }
}

const ARTIFACT_HEADER: &str = "olsatt-model 1";

/// Everything `predict` needs: feature names, optional scaling and the fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub method: String,
    pub target: String,
    pub features: Vec<String>,
    pub scaler: Option<Scaler>,
    pub predictor: Predictor,
}

fn join(values: impl Iterator<Item = f64>) -> String {
    values.map(fmt_f64).collect::<Vec<_>>().join(" ")
}

impl FittedModel {
    /// Predictions for raw (unscaled) predictor rows in `features` order.
    pub fn predict(&self, x: &DMatrix<f64>) -> CliResult<DVector<f64>> {
        match &self.scaler {
            Some(s) => self.predictor.predict(&s.apply(x)),
            None => self.predictor.predict(x),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{ARTIFACT_HEADER}");
        let _ = writeln!(s, "method {}", self.method);
        let _ = writeln!(s, "target {}", self.target);
        let _ = writeln!(s, "features {}", self.features.join(","));
        match &self.scaler {
            Some(sc) => {
                let _ = writeln!(s, "center {}", join(sc.center.iter().copied()));
                let _ = writeln!(s, "scale {}", join(sc.scale.iter().copied()));
            }
            None => {
                let _ = writeln!(s, "unscaled");
            }
        }
        match &self.predictor {
            Predictor::Linear {
                intercept,
                coefficients,
            } => {
                let _ = writeln!(s, "intercept {}", fmt_f64(*intercept));
                let _ = writeln!(s, "coefficients {}", join(coefficients.iter().copied()));
                s.push_str("end\n");
            }
            Predictor::AttReg(model) => {
                s.push_str("attreg\n");
                s.push_str(&model.to_text());
            }
        }
        s
    }

    pub fn from_text(text: &str) -> CliResult<Self> {
        let bad = |line: usize, msg: &str| CliError::Data(format!("model file line {line}: {msg}"));
        let lines: Vec<&str> = text.lines().collect();
        let pos = std::cell::Cell::new(0usize);
        let next = |key: &str| -> CliResult<(usize, String)> {
            let at = pos.get();
            let line = lines.get(at).ok_or_else(|| bad(at + 1, &format!("missing '{key}'")))?;
            pos.set(at + 1);
            let pos = at + 1;
            let rest = line
                .strip_prefix(key)
                .filter(|r| r.is_empty() || r.starts_with(' '))
                .ok_or_else(|| bad(pos, &format!("expected '{key}'")))?;
            Ok((pos, rest.trim().to_string()))
        };
        let floats = |line: usize, s: &str| -> CliResult<Vec<f64>> {
            s.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| bad(line, &format!("invalid number '{t}'"))))
                .collect()
        };
        let (ln, header) = next("olsatt-model")?;
        if header != "1" {
            return Err(bad(ln, "unsupported model format version"));
        }
        let method = next("method")?.1;
        let target = next("target")?.1;
        let features: Vec<String> = next("features")?.1.split(',').map(str::to_string).collect();
        let p = features.len();
        let scaler = if lines.get(pos.get()).is_some_and(|l| l.starts_with("center")) {
            let (ln, c) = next("center")?;
            let center = floats(ln, &c)?;
            let (ln2, sc) = next("scale")?;
            let scale = floats(ln2, &sc)?;
            if center.len() != p || scale.len() != p {
                return Err(bad(ln, "scaling vectors do not match the feature count"));
            }
            Some(Scaler { center, scale })
        } else {
            next("unscaled")?;
            None
        };
        let predictor = if lines.get(pos.get()).is_some_and(|l| l.trim() == "attreg") {
            let pos = pos.get() + 1;
            let rest = lines[pos..].join("\n");
            let model = MultiHeadModel::from_text(&rest)?;
            if model.dim() != p {
                return Err(bad(pos, "attention model dimension does not match the features"));
            }
            Predictor::AttReg(Box::new(model))
        } else {
            let (ln, i) = next("intercept")?;
            let intercept = floats(ln, &i)?
                .first()
                .copied()
                .ok_or_else(|| bad(ln, "missing intercept"))?;
            let (ln, c) = next("coefficients")?;
            let coefficients = floats(ln, &c)?;
            if coefficients.len() != p {
                return Err(bad(ln, "coefficient count does not match the features"));
            }
            next("end")?;
            Predictor::Linear {
                intercept,
                coefficients: DVector::from_vec(coefficients),
            }
        };
        Ok(Self {
            method,
            target,
            features,
            scaler,
            predictor,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (DMatrix<f64>, DVector<f64>) {
        let x = DMatrix::from_fn(12, 2, |i, k| ((i * (k + 3)) % 7) as f64 * 0.3 + k as f64);
        let y = DVector::from_fn(12, |i, _| 1.5 + 2.0 * x[(i, 0)] - x[(i, 1)] + (i % 3) as f64 * 0.1);
        (x, y)
    }

    #[test]
    fn parses_method_names() {
        assert_eq!("ols".parse::<MethodSpec>().unwrap(), MethodSpec::Ols);
        assert_eq!("Ridge:0.5".parse::<MethodSpec>().unwrap(), MethodSpec::Ridge(Some(0.5)));
        assert_eq!("pcr".parse::<MethodSpec>().unwrap(), MethodSpec::Pcr(None));
        assert!("pcr:x".parse::<MethodSpec>().is_err());
        assert!("lasso".parse::<MethodSpec>().is_err());
        let cfg = AttRegConfig::default();
        assert!(MethodSpec::Pcr(None).resolve(None, None, &cfg).is_err());
        assert_eq!(MethodSpec::Pcr(None).resolve(None, Some(2), &cfg).unwrap(), Method::Pcr(2));
        assert_eq!(MethodSpec::Ridge(None).resolve(None, None, &cfg).unwrap().label(), "ridge:1");
        match MethodSpec::AttReg.resolve(Some(0.5), None, &cfg).unwrap() {
            Method::AttReg(c) => assert_eq!(c.ridge_penalty, 0.5),
            m => panic!("{m:?}"),
        }
    }

    #[test]
    fn ols_recovers_exact_plane() {
        let x = DMatrix::from_fn(10, 2, |i, k| (i as f64).powi(k as i32 + 1) * 0.1);
        let y = DVector::from_fn(10, |i, _| 3.0 - 2.0 * x[(i, 0)] + 0.5 * x[(i, 1)]);
        match fit_method(&Method::Ols, &x, &y).unwrap() {
            Predictor::Linear { intercept, coefficients } => {
                assert!((intercept - 3.0).abs() < 1e-10);
                assert!((coefficients[0] + 2.0).abs() < 1e-10);
                assert!((coefficients[1] - 0.5).abs() < 1e-10);
            }
            p => panic!("{p:?}"),
        }
    }

    #[test]
    fn ridge_zero_and_full_pcr_are_ols() {
        let (x, y) = toy();
        let ols = fit_method(&Method::Ols, &x, &y).unwrap().predict(&x).unwrap();
        for m in [Method::Ridge(0.0), Method::Pcr(2)] {
            let pred = fit_method(&m, &x, &y).unwrap().predict(&x).unwrap();
            assert!((pred - &ols).amax() < 1e-10);
        }
    }

    #[test]
    fn ridge_matches_centered_closed_form() {
        let (x, y) = toy();
        let lambda = 2.5;
        let pred = fit_method(&Method::Ridge(lambda), &x, &y).unwrap().predict(&x).unwrap();
        let (xc, _) = center_columns(&x);
        let yc = y.add_scalar(-y.mean());
        let a = xc.transpose() * &xc + DMatrix::identity(2, 2) * lambda;
        let beta = a.lu().solve(&(xc.transpose() * yc)).unwrap();
        let direct = (&xc * beta).add_scalar(y.mean());
        assert!((pred - direct).amax() < 1e-10);
    }

    #[test]
    fn artifacts_round_trip() {
        let (x, y) = toy();
        let scaler = Scaler::fit(&x);
        for method in [
            Method::Ols,
            Method::Ridge(0.3),
            Method::AttReg(AttRegConfig {
                heads: 2,
                max_iterations: 5,
                ..AttRegConfig::default()
            }),
        ] {
            let mut predictor = fit_method(&method, &scaler.apply(&x), &y).unwrap();
            // training diagnostics are not part of the artifact
            if let Predictor::AttReg(m) = &mut predictor {
                m.diagnostics = None;
            }
            let model = FittedModel {
                method: method.label(),
                target: "y".into(),
                features: vec!["a".into(), "b".into()],
                scaler: Some(scaler.clone()),
                predictor,
            };
            let back = FittedModel::from_text(&model.to_text()).unwrap();
            assert_eq!(back, model);
            assert_eq!(back.predict(&x).unwrap(), model.predict(&x).unwrap());
        }
        assert!(FittedModel::from_text("olsatt-model 2\n").is_err());
    }

    #[test]
    fn scaler_standardizes() {
        let (x, _) = toy();
        let z = Scaler::fit(&x).apply(&x);
        for c in z.column_iter() {
            assert!(c.mean().abs() < 1e-12);
            let var = c.iter().map(|v| v * v).sum::<f64>() / 11.0;
            assert!((var - 1.0).abs() < 1e-12);
        }
        let constant = DMatrix::from_element(4, 1, 2.0);
        assert_eq!(Scaler::fit(&constant).scale, vec![1.0]);
    }
}
