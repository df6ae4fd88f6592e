//! Monte Carlo benchmark over a grid of DGPs, sample sizes and SNRs.
//!
//! Every (dgp, n, snr, replication) cell draws its own training sample from a
//! seed mixed out of the base seed and the cell coordinates, so a cell's
//! numbers do not depend on which other cells are in the grid or on the order
//! in which workers finish. The test set is fixed per (dgp, snr) and its
//! noise is scaled by each training sample's `σ²`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use olsatt::dgp::{self, DgpKind, DgpSpec, TestSet};
use olsatt::fmt_f64;
use olsatt::metrics::out_of_sample_r2;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::model::{fit_method, Method};

pub const DESK_SAMPLE_SIZES: [usize; 2] = [500, 1000];
pub const FULL_SAMPLE_SIZES: [usize; 4] = [500, 1000, 2500, 5000];
pub const SNRS: [f64; 4] = [0.5, 1.0, 2.0, 3.0];
pub const DEFAULT_REPLICATIONS: usize = 10;
pub const DEFAULT_TEST_SIZE: usize = 1000;

const TRAIN_STREAM: u64 = 1;
const TEST_STREAM: u64 = 2;
const MODEL_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dgps: Vec<DgpKind>,
    pub sample_sizes: Vec<usize>,
    pub snrs: Vec<f64>,
    pub replications: usize,
    pub test_size: usize,
    pub methods: Vec<Method>,
    pub base_seed: u64,
    /// Directory for result files; nothing is written when unset.
    pub output_path: Option<PathBuf>,
    /// Worker count; 0 lets the pool pick.
    pub threads: usize,
}

impl ExperimentConfig {
    /// All six DGPs, N ∈ {500, 1000}, every SNR, 10 replications.
    pub fn desk_scale(methods: Vec<Method>, base_seed: u64) -> Self {
        Self {
            dgps: DgpKind::ALL.to_vec(),
            sample_sizes: DESK_SAMPLE_SIZES.to_vec(),
            snrs: SNRS.to_vec(),
            replications: DEFAULT_REPLICATIONS,
            test_size: DEFAULT_TEST_SIZE,
            methods,
            base_seed,
            output_path: None,
            threads: 0,
        }
    }

    /// Desk scale with N ∈ {500, 1000, 2500, 5000}.
    pub fn full_scale(methods: Vec<Method>, base_seed: u64) -> Self {
        Self {
            sample_sizes: FULL_SAMPLE_SIZES.to_vec(),
            ..Self::desk_scale(methods, base_seed)
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Usage(m.to_string()));
        if self.dgps.is_empty() || self.sample_sizes.is_empty() || self.snrs.is_empty() || self.methods.is_empty() {
            return bad("dgps, sample sizes, SNRs and methods must all be non-empty");
        }
        if self.replications == 0 {
            return bad("replications must be at least 1");
        }
        if self.test_size < 2 {
            return bad("test size must be at least 2");
        }
        if self.sample_sizes.iter().any(|&n| n < 2) {
            return bad("sample sizes must be at least 2");
        }
        if self.snrs.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return bad("SNRs must be positive and finite");
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.dgps.len() * self.sample_sizes.len() * self.snrs.len() * self.replications
    }

    pub fn record_count(&self) -> usize {
        self.cell_count() * self.methods.len()
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `parts` into `base` one SplitMix64 round at a time.
pub fn mix_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(base), |h, &p| splitmix64(h ^ p))
}

pub fn training_seed(base: u64, dgp: DgpKind, n: usize, snr: f64, replication: usize) -> u64 {
    mix_seed(
        base,
        &[TRAIN_STREAM, dgp.index() as u64, n as u64, snr.to_bits(), replication as u64],
    )
}

pub fn test_seed(base: u64, dgp: DgpKind, snr: f64) -> u64 {
    mix_seed(base, &[TEST_STREAM, dgp.index() as u64, snr.to_bits()])
}

pub fn model_seed(training_seed: u64) -> u64 {
    mix_seed(training_seed, &[MODEL_STREAM])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub dgp: String,
    pub n: usize,
    pub snr: f64,
    pub replication: usize,
    pub method: String,
    /// `None` when the fit failed; see `error`.
    pub r2_test: Option<f64>,
    /// R² of the predictions against the noiseless test signal.
    pub r2_vs_signal: Option<f64>,
    pub fit_seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub dgp: String,
    pub method: String,
    pub mean_r2_test: Option<f64>,
    pub sd_r2_test: Option<f64>,
    pub records: usize,
    pub failures: usize,
}

/// Per (dgp, n, snr, method) averages for external plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub dgp: String,
    pub n: usize,
    pub snr: f64,
    pub method: String,
    pub mean_r2_test: Option<f64>,
    pub sd_r2_test: Option<f64>,
    pub mean_r2_vs_signal: Option<f64>,
    pub r2_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub records: Vec<Record>,
    pub summary: Vec<SummaryRow>,
    pub plot: Vec<PlotRow>,
}

impl ExperimentResult {
    /// Mean test R² over the successful records accepted by `keep`.
    pub fn mean_r2(&self, keep: impl Fn(&Record) -> bool) -> Option<f64> {
        mean_sd(self.records.iter().filter(|r| keep(r)).filter_map(|r| r.r2_test)).0
    }
}

fn mean_sd(values: impl Iterator<Item = f64>) -> (Option<f64>, Option<f64>) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (Some(mean), Some(sd))
}

struct Cell {
    dgp: DgpKind,
    n: usize,
    snr: f64,
    replication: usize,
}

fn run_cell(config: &ExperimentConfig, cell: &Cell, test: &TestSet) -> Vec<Record> {
    let seed = training_seed(config.base_seed, cell.dgp, cell.n, cell.snr, cell.replication);
    let record = |method: &Method| Record {
        dgp: cell.dgp.name().to_string(),
        n: cell.n,
        snr: cell.snr,
        replication: cell.replication,
        method: method.label(),
        r2_test: None,
        r2_vs_signal: None,
        fit_seconds: 0.0,
        error: None,
    };
    let data = match dgp::generate(&DgpSpec::new(cell.dgp), cell.n, cell.snr, seed) {
        Ok(d) => d,
        Err(e) => {
            return config
                .methods
                .iter()
                .map(|m| Record {
                    error: Some(format!("data: {e}")),
                    ..record(m)
                })
                .collect()
        }
    };
    let y_test = test.outcomes(data.noise_variance);
    config
        .methods
        .iter()
        .map(|method| {
            let method = match method {
                Method::AttReg(c) => Method::AttReg(olsatt::attreg::AttRegConfig {
                    seed: model_seed(seed),
                    ..c.clone()
                }),
                m => m.clone(),
            };
            let start = Instant::now();
            let outcome = fit_method(&method, data.x.values(), &data.y)
                .and_then(|p| p.predict(test.x.values()));
            let fit_seconds = start.elapsed().as_secs_f64();
            let mut rec = Record {
                fit_seconds,
                ..record(&method)
            };
            match outcome.and_then(|pred| {
                let a = out_of_sample_r2(y_test.as_slice(), pred.as_slice())?;
                let b = out_of_sample_r2(test.signal.as_slice(), pred.as_slice())?;
                Ok((a, b))
            }) {
                Ok((a, b)) => {
                    rec.r2_test = Some(a);
                    rec.r2_vs_signal = Some(b);
                }
                Err(e) => rec.error = Some(e.to_string()),
            }
            rec
        })
        .collect()
}

/// Runs the grid, writes the result files when `output_path` is set, and
/// returns the records in grid order (dgp, n, snr, replication, method).
pub fn run_experiment(config: &ExperimentConfig) -> CliResult<ExperimentResult> {
    config.validate()?;
    let mut tests = BTreeMap::new();
    for &dgp in &config.dgps {
        for (k, &snr) in config.snrs.iter().enumerate() {
            let seed = test_seed(config.base_seed, dgp, snr);
            let set = dgp::generate_test_set(&DgpSpec::new(dgp), config.test_size, seed)?;
            tests.insert((dgp.index(), k), set);
        }
    }
    let mut cells = Vec::with_capacity(config.cell_count());
    for &dgp in &config.dgps {
        for &n in &config.sample_sizes {
            for (k, &snr) in config.snrs.iter().enumerate() {
                for replication in 0..config.replications {
                    cells.push((
                        k,
                        Cell {
                            dgp,
                            n,
                            snr,
                            replication,
                        },
                    ));
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let nested: Vec<Vec<Record>> = pool.install(|| {
        cells
            .par_iter()
            .map(|(k, cell)| run_cell(config, cell, &tests[&(cell.dgp.index(), *k)]))
            .collect()
    });
    let records: Vec<Record> = nested.into_iter().flatten().collect();
    let result = ExperimentResult {
        summary: summarize(config, &records),
        plot: plot_rows(config, &records),
        records,
    };
    if let Some(dir) = &config.output_path {
        write_results(config, &result, dir)?;
    }
    Ok(result)
}

fn summarize(config: &ExperimentConfig, records: &[Record]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for dgp in &config.dgps {
        for method in &config.methods {
            let label = method.label();
            let rows: Vec<&Record> = records
                .iter()
                .filter(|r| r.dgp == dgp.name() && r.method == label)
                .collect();
            let (mean, sd) = mean_sd(rows.iter().filter_map(|r| r.r2_test));
            out.push(SummaryRow {
                dgp: dgp.name().to_string(),
                method: label,
                mean_r2_test: mean,
                sd_r2_test: sd,
                records: rows.len(),
                failures: rows.iter().filter(|r| r.error.is_some()).count(),
            });
        }
    }
    out
}

fn plot_rows(config: &ExperimentConfig, records: &[Record]) -> Vec<PlotRow> {
    let mut out = Vec::new();
    for dgp in &config.dgps {
        for &n in &config.sample_sizes {
            for &snr in &config.snrs {
                for method in &config.methods {
                    let label = method.label();
                    let rows: Vec<&Record> = records
                        .iter()
                        .filter(|r| r.dgp == dgp.name() && r.n == n && r.snr == snr && r.method == label)
                        .collect();
                    let (mean, sd) = mean_sd(rows.iter().filter_map(|r| r.r2_test));
                    let (signal, _) = mean_sd(rows.iter().filter_map(|r| r.r2_vs_signal));
                    out.push(PlotRow {
                        dgp: dgp.name().to_string(),
                        n,
                        snr,
                        method: label,
                        mean_r2_test: mean,
                        sd_r2_test: sd,
                        mean_r2_vs_signal: signal,
                        r2_max: dgp::r2_max(snr),
                    });
                }
            }
        }
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    dgps: Vec<&'static str>,
    sample_sizes: &'a [usize],
    snrs: &'a [f64],
    replications: usize,
    test_size: usize,
    methods: Vec<String>,
    base_seed: u64,
    records: usize,
    failures: usize,
    summary: &'a [SummaryRow],
}

/// Writes `records.csv`, `summary.json` and `plot_data.csv`, which depend
/// only on the configuration, and `timings.csv` with wall-clock fit times.
pub fn write_results(config: &ExperimentConfig, result: &ExperimentResult, dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))?;
    let write = |name: &str, body: String| -> CliResult<()> {
        let path = dir.join(name);
        fs::File::create(&path)
            .and_then(|mut f| f.write_all(body.as_bytes()))
            .map_err(|e| CliError::io(path.display(), e))
    };

    let mut records = String::from("dgp,n,snr,replication,method,r2_test,r2_vs_signal,error\n");
    let mut timings = String::from("dgp,n,snr,replication,method,fit_seconds\n");
    for r in &result.records {
        records.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.dgp,
            r.n,
            fmt_f64(r.snr),
            r.replication,
            r.method,
            opt(r.r2_test),
            opt(r.r2_vs_signal),
            csv_text(r.error.as_deref().unwrap_or("")),
        ));
        timings.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.dgp,
            r.n,
            fmt_f64(r.snr),
            r.replication,
            r.method,
            fmt_f64(r.fit_seconds)
        ));
    }
    write("records.csv", records)?;
    write("timings.csv", timings)?;

    let mut plot = String::from("dgp,n,snr,method,mean_r2_test,sd_r2_test,mean_r2_vs_signal,r2_max\n");
    for p in &result.plot {
        plot.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            p.dgp,
            p.n,
            fmt_f64(p.snr),
            p.method,
            opt(p.mean_r2_test),
            opt(p.sd_r2_test),
            opt(p.mean_r2_vs_signal),
            fmt_f64(p.r2_max)
        ));
    }
    write("plot_data.csv", plot)?;

    let summary = SummaryFile {
        dgps: config.dgps.iter().map(|d| d.name()).collect(),
        sample_sizes: &config.sample_sizes,
        snrs: &config.snrs,
        replications: config.replications,
        test_size: config.test_size,
        methods: config.methods.iter().map(|m| m.label()).collect(),
        base_seed: config.base_seed,
        records: result.records.len(),
        failures: result.records.iter().filter(|r| r.error.is_some()).count(),
        summary: &result.summary,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Data(e.to_string()))?;
    write("summary.json", json + "\n")
}

/// The result files whose bytes are fixed by the configuration.
pub const DETERMINISTIC_FILES: [&str; 3] = ["records.csv", "summary.json", "plot_data.csv"];
