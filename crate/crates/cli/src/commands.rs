//! The five subcommands as library functions.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use olsatt::attention::{
    attention_weights, ols_embedding, pcr_embedding, ridge_embedding, softmax_in_place, Activation,
    ActivationKind,
};
use olsatt::attreg::{AttRegConfig, MultiHeadModel};
use olsatt::dgp::{self, DgpKind, DgpSpec};
use olsatt::metrics::out_of_sample_r2;
use olsatt::{fmt_f64, DesignMatrix};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::experiment::{
    self, mix_seed, run_experiment, training_seed, ExperimentConfig, ExperimentResult,
    DEFAULT_REPLICATIONS, DEFAULT_TEST_SIZE, DESK_SAMPLE_SIZES, FULL_SAMPLE_SIZES, SNRS,
};
use crate::model::{fit_method, FittedModel, Method, MethodSpec, Predictor, Scaler};
use crate::settings::Settings;
use crate::table::{read_table, write_table, Table};

const SPLIT_STREAM: u64 = 4;
pub const DEFAULT_BENCH_METHODS: [&str; 2] = ["ols", "attreg"];

fn dgps(s: &Settings) -> CliResult<Vec<DgpKind>> {
    match &s.dgp {
        None => Ok(DgpKind::ALL.to_vec()),
        Some(names) if names.iter().any(|n| n == "all") => Ok(DgpKind::ALL.to_vec()),
        Some(names) => names
            .iter()
            .map(|n| n.parse::<DgpKind>().map_err(|e| CliError::Usage(e.to_string())))
            .collect(),
    }
}

pub fn attreg_config(s: &Settings) -> AttRegConfig {
    let d = AttRegConfig::default();
    AttRegConfig {
        heads: s.heads.unwrap_or(d.heads),
        diagonal_mask: s.diagonal_mask.unwrap_or(d.diagonal_mask),
        seed: s.seed.unwrap_or(d.seed),
        ..d
    }
}

/// Methods named in the settings (or `default`), with tuning values filled in.
pub fn methods(s: &Settings, default: &[&str]) -> CliResult<Vec<Method>> {
    let names: Vec<String> = match &s.method {
        Some(m) => m.clone(),
        None => default.iter().map(|m| m.to_string()).collect(),
    };
    let base = attreg_config(s);
    names
        .iter()
        .map(|n| n.parse::<MethodSpec>()?.resolve(s.lambda, s.rank, &base))
        .collect()
}

pub fn experiment_config(s: &Settings) -> CliResult<ExperimentConfig> {
    let sample_sizes = match (&s.n, s.full.unwrap_or(false)) {
        (Some(n), _) => n.clone(),
        (None, true) => FULL_SAMPLE_SIZES.to_vec(),
        (None, false) => DESK_SAMPLE_SIZES.to_vec(),
    };
    let config = ExperimentConfig {
        dgps: dgps(s)?,
        sample_sizes,
        snrs: s.snr.clone().unwrap_or_else(|| SNRS.to_vec()),
        replications: s.reps.unwrap_or(DEFAULT_REPLICATIONS),
        test_size: s.test_size.unwrap_or(DEFAULT_TEST_SIZE),
        methods: methods(s, &DEFAULT_BENCH_METHODS)?,
        base_seed: s.seed.unwrap_or(0),
        output_path: Some(s.out.clone().unwrap_or_else(|| PathBuf::from("bench_out"))),
        threads: s.threads.unwrap_or(0),
    };
    config.validate()?;
    Ok(config)
}

pub fn bench(s: &Settings) -> CliResult<ExperimentResult> {
    run_experiment(&experiment_config(s)?)
}

/// Writes one CSV per (dgp, n, snr). The draw is the one the benchmark uses
/// for replication 0 with the same seed. With a single combination and an
/// `--out` ending in `.csv` that file is written; otherwise `--out` is a
/// directory (default `data`).
pub fn simulate(s: &Settings) -> CliResult<Vec<PathBuf>> {
    let kinds = dgps(s)?;
    let ns = s.n.clone().unwrap_or_else(|| vec![1000]);
    let snrs = s.snr.clone().unwrap_or_else(|| vec![1.0]);
    let seed = s.seed.unwrap_or(0);
    let out = s.out.clone().unwrap_or_else(|| PathBuf::from("data"));
    let single = kinds.len() * ns.len() * snrs.len() == 1;
    let to_file = single && out.extension().is_some_and(|e| e == "csv");
    if !to_file {
        fs::create_dir_all(&out).map_err(|e| CliError::io(out.display(), e))?;
    }
    let mut written = Vec::new();
    for &kind in &kinds {
        for &n in &ns {
            for &snr in &snrs {
                let data = dgp::generate(&DgpSpec::new(kind), n, snr, training_seed(seed, kind, n, snr, 0))?;
                let path = if to_file {
                    out.clone()
                } else {
                    out.join(format!("{}_n{n}_snr{snr}.csv", kind.name()))
                };
                let file = fs::File::create(&path).map_err(|e| CliError::io(path.display(), e))?;
                data.write_csv(std::io::BufWriter::new(file))
                    .map_err(|e| CliError::io(path.display(), e))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

/// Column written by `simulate` with the noiseless signal; never a predictor.
pub const SIGNAL_COLUMN: &str = "signal";

/// Feature columns: everything except the target, the excluded names and
/// the signal column.
fn feature_names(table: &Table, target: &str, exclude: &[String]) -> CliResult<Vec<String>> {
    if let Some(missing) = exclude.iter().find(|e| table.column_index(e).is_none()) {
        return Err(CliError::Data(format!("excluded column '{missing}' not found")));
    }
    let features: Vec<String> = table
        .headers
        .iter()
        .filter(|h| *h != target && *h != SIGNAL_COLUMN && !exclude.contains(h))
        .cloned()
        .collect();
    if features.is_empty() {
        return Err(CliError::Data("no predictor columns left".into()));
    }
    Ok(features)
}

/// Deterministic train/test split: rows ordered by a seeded hash of their
/// index, the first `round(fraction · N)` go to the test set. Both parts
/// keep file order.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> CliResult<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(CliError::Usage(format!("test fraction must be in [0, 1), got {fraction}")));
    }
    if fraction == 0.0 {
        return Ok(((0..n).collect(), Vec::new()));
    }
    let n_test = ((fraction * n as f64).round() as usize).max(1);
    if n < n_test + 2 {
        return Err(CliError::Data(format!("{n} rows are too few for a {fraction} test split")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| mix_seed(seed, &[SPLIT_STREAM, i as u64]));
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

fn rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), x.ncols(), |i, k| x[(idx[i], k)])
}

fn entries(y: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| y[i]))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttRegDiagnostics {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub iterations: usize,
    pub stop_reason: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub method: String,
    pub target: String,
    pub features: Vec<String>,
    pub standardize: bool,
    pub n_train: usize,
    pub n_test: usize,
    pub r2_in_sample: f64,
    pub r2_test: Option<f64>,
    pub attreg: Option<AttRegDiagnostics>,
    pub model_path: PathBuf,
    pub report_path: PathBuf,
}

/// Metrics report path next to the model: `model.txt` → `model.metrics.json`.
pub fn report_path(model_path: &Path) -> PathBuf {
    model_path.with_extension("metrics.json")
}

pub fn fit_csv(input: &Path, s: &Settings) -> CliResult<FitReport> {
    let table = read_table(input)?;
    let target = s.target.clone().unwrap_or_else(|| "y".to_string());
    let y = table
        .column(&target)
        .ok_or_else(|| CliError::MissingTarget(target.clone()))?;
    let features = feature_names(&table, &target, s.exclude.as_deref().unwrap_or(&[]))?;
    let x = table.select(&features)?;
    let method = match methods(s, &["ols"])?.as_slice() {
        [m] => m.clone(),
        _ => return Err(CliError::Usage("fit takes exactly one method".into())),
    };
    let (train, test) = split_indices(table.nrows(), s.test_fraction.unwrap_or(0.0), s.seed.unwrap_or(0))?;
    let (x_train, y_train) = (rows(&x, &train), entries(&y, &train));
    let standardize = s.standardize.unwrap_or(false);
    let scaler = standardize.then(|| Scaler::fit(&x_train));
    let design = match &scaler {
        Some(sc) => sc.apply(&x_train),
        None => x_train.clone(),
    };
    let predictor = fit_method(&method, &design, &y_train)?;
    let model = FittedModel {
        method: method.label(),
        target: target.clone(),
        features: features.clone(),
        scaler,
        predictor,
    };
    let r2_in_sample = out_of_sample_r2(y_train.as_slice(), model.predict(&x_train)?.as_slice())?;
    let r2_test = if test.is_empty() {
        None
    } else {
        let pred = model.predict(&rows(&x, &test))?;
        Some(out_of_sample_r2(entries(&y, &test).as_slice(), pred.as_slice())?)
    };
    let attreg = match &model.predictor {
        Predictor::AttReg(m) => m.diagnostics.as_ref().map(|d| AttRegDiagnostics {
            initial_loss: d.initial_loss,
            final_loss: d.final_loss,
            iterations: d.iterations,
            stop_reason: d.stop_reason.as_str(),
        }),
        Predictor::Linear { .. } => None,
    };
    let model_path = s.out.clone().unwrap_or_else(|| PathBuf::from("model.txt"));
    fs::write(&model_path, model.to_text()).map_err(|e| CliError::io(model_path.display(), e))?;
    let report = FitReport {
        method: model.method.clone(),
        target,
        features,
        standardize,
        n_train: train.len(),
        n_test: test.len(),
        r2_in_sample,
        r2_test,
        attreg,
        report_path: report_path(&model_path),
        model_path,
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Data(e.to_string()))?;
    fs::write(&report.report_path, json + "\n").map_err(|e| CliError::io(report.report_path.display(), e))?;
    Ok(report)
}

pub fn load_model(path: &Path) -> CliResult<FittedModel> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
    FittedModel::from_text(&text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictReport {
    pub rows: usize,
    pub r2: Option<f64>,
    pub output: PathBuf,
}

/// Applies a saved model to `input`; reports R² when the target is present.
pub fn predict(input: &Path, s: &Settings) -> CliResult<PredictReport> {
    let model_path = s
        .model
        .clone()
        .ok_or_else(|| CliError::Usage("predict needs --model".into()))?;
    let model = load_model(&model_path)?;
    let table = read_table(input)?;
    let x = table.select(&model.features)?;
    let pred = model.predict(&x)?;
    let output = s.out.clone().unwrap_or_else(|| PathBuf::from("predictions.csv"));
    write_table(&output, &["prediction".to_string()], &DMatrix::from_column_slice(pred.len(), 1, pred.as_slice()))?;
    let r2 = match table.column(&model.target) {
        Some(y) => Some(out_of_sample_r2(y.as_slice(), pred.as_slice())?),
        None => None,
    };
    Ok(PredictReport {
        rows: pred.len(),
        r2,
        output,
    })
}

fn parse_activation(name: &str) -> CliResult<ActivationKind> {
    let (tag, arg) = match name.split_once(':') {
        Some((t, a)) => (t, Some(a)),
        None => (name, None),
    };
    match (tag, arg) {
        ("identity", None) => Ok(ActivationKind::identity()),
        ("softmax", None) => Ok(ActivationKind::softmax()),
        ("relu", None) => Ok(ActivationKind::relu()),
        ("elu", a) => {
            let nu = a
                .map(|v| v.parse::<f64>())
                .transpose()
                .map_err(|_| CliError::Usage(format!("invalid elu parameter in '{name}'")))?
                .unwrap_or(1.0);
            Ok(ActivationKind::elu(nu))
        }
        _ => Err(CliError::Usage(format!(
            "unknown activation '{name}' (identity, softmax, relu, elu[:ν])"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightExport {
    pub weights: DMatrix<f64>,
    /// Present for row-normalized weights.
    pub row_sums: Option<DVector<f64>>,
    pub output: PathBuf,
}

/// Softmax weights of one head (or the α-weighted sum over heads) of a fitted
/// attention model, against the model's own training rows.
fn attreg_weights(model: &MultiHeadModel, xq: &DMatrix<f64>, head: Option<usize>) -> CliResult<(DMatrix<f64>, bool)> {
    let x = model.train_x.values();
    let mask = model.config.diagonal_mask && xq == x;
    let chosen: Vec<(usize, f64)> = match head {
        Some(h) if h < model.heads.len() => vec![(h, 1.0)],
        Some(h) => {
            return Err(CliError::Usage(format!(
                "head {h} out of range (model has {})",
                model.heads.len()
            )))
        }
        None => model.heads.iter().enumerate().map(|(i, h)| (i, h.alpha)).collect(),
    };
    let mut total = DMatrix::zeros(xq.nrows(), x.nrows());
    for (h, weight) in chosen {
        let l = &model.heads[h].factor;
        let mut scores = (xq * l) * (x * l).transpose();
        for i in 0..scores.nrows() {
            let mut row: Vec<f64> = scores.row(i).iter().copied().collect();
            if mask && x.nrows() > 1 {
                row[i] = f64::NEG_INFINITY;
            }
            softmax_in_place(&mut row);
            for (j, v) in row.into_iter().enumerate() {
                scores[(i, j)] = v;
            }
        }
        total += scores * weight;
    }
    Ok((total, head.is_some()))
}

fn with_intercept(x: DesignMatrix, add: bool) -> DesignMatrix {
    if add && !x.has_intercept() {
        x.with_intercept()
    } else {
        x
    }
}

/// Writes the query × key weight matrix with 1-based observation indices.
///
/// With `--model` (an attention-regression artifact) the keys are the
/// model's training rows. Otherwise the metric comes from `--method`
/// (ols, ridge, pcr) on the `--key` file, a constant column is added to both
/// sides unless `--no-intercept`, and `--activation` is applied row-wise.
/// Normalized rows get a `row_sum` column, checked to be within 1e-8 of 1.
pub fn export_weights(s: &Settings) -> CliResult<WeightExport> {
    let output = s.out.clone().unwrap_or_else(|| PathBuf::from("weights.csv"));
    let exclude = s.exclude.clone().unwrap_or_default();
    let (weights, normalized) = if let Some(path) = &s.model {
        let model = load_model(path)?;
        let Predictor::AttReg(m) = &model.predictor else {
            return Err(CliError::Usage(
                "--model must be an attreg artifact; use --key and --method for linear weights".into(),
            ));
        };
        let xq = match &s.query {
            Some(q) => {
                let raw = read_table(q)?.select(&model.features)?;
                match &model.scaler {
                    Some(sc) => sc.apply(&raw),
                    None => raw,
                }
            }
            None => m.train_x.values().clone(),
        };
        attreg_weights(m, &xq, s.head)?
    } else {
        let key_path = s
            .key
            .clone()
            .ok_or_else(|| CliError::Usage("weights needs --key (or --model)".into()))?;
        let key = read_table(&key_path)?;
        let target = s.target.clone().unwrap_or_else(|| "y".to_string());
        let features = feature_names(&key, &target, &exclude)?;
        let xk = key.select(&features)?;
        let xq = match &s.query {
            Some(q) => read_table(q)?.select(&features)?,
            None => xk.clone(),
        };
        let add = !s.no_intercept.unwrap_or(false);
        let xk = with_intercept(DesignMatrix::new(xk)?, add);
        let xq = with_intercept(DesignMatrix::new(xq)?, add);
        let method = match methods(s, &["ols"])?.as_slice() {
            [m] => m.clone(),
            _ => return Err(CliError::Usage("weights takes exactly one method".into())),
        };
        let omega = match method {
            Method::Ols => ols_embedding(&xk)?,
            Method::Ridge(l) => ridge_embedding(&xk, l)?,
            Method::Pcr(r) => pcr_embedding(&xk, r)?,
            Method::AttReg(_) => {
                return Err(CliError::Usage("attreg weights need a fitted --model".into()))
            }
        };
        let activation = parse_activation(s.activation.as_deref().unwrap_or("identity"))?;
        let w = attention_weights(&xq, &xk, &omega, &activation)?;
        (w, activation.tag != Activation::Identity)
    };

    let row_sums = normalized.then(|| DVector::from_iterator(weights.nrows(), weights.row_iter().map(|r| r.sum())));
    if let Some(sums) = &row_sums {
        if let Some((i, v)) = sums.iter().enumerate().find(|(_, v)| (*v - 1.0).abs() > 1e-8) {
            return Err(CliError::Core(olsatt::Error::DegenerateRow { row: i, normalizer: *v }));
        }
    }
    let (j, n) = weights.shape();
    let mut headers = vec!["query".to_string()];
    headers.extend((1..=n).map(|k| k.to_string()));
    let extra = usize::from(row_sums.is_some());
    let table = DMatrix::from_fn(j, n + 1 + extra, |i, c| match c {
        0 => (i + 1) as f64,
        c if c <= n => weights[(i, c - 1)],
        _ => row_sums.as_ref().map_or(0.0, |s| s[i]),
    });
    if extra == 1 {
        headers.push("row_sum".to_string());
    }
    write_table(&output, &headers, &table)?;
    Ok(WeightExport {
        weights,
        row_sums,
        output,
    })
}

/// One line per (dgp, method) for the terminal.
pub fn summary_lines(result: &ExperimentResult) -> Vec<String> {
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
    result
        .summary
        .iter()
        .map(|r| {
            format!(
                "{:<13} {:<12} mean R2 {} sd {} ({} records, {} failed)",
                r.dgp,
                r.method,
                fmt(r.mean_r2_test),
                fmt(r.sd_r2_test),
                r.records,
                r.failures
            )
        })
        .collect()
}

/// Formats a metric for terminal output at full precision.
pub fn show(v: f64) -> String {
    fmt_f64(v)
}

pub use experiment::DETERMINISTIC_FILES;
