//! Options from a config file and from command-line flags.
//!
//! Config files are flat `key = value` lines; `#` starts a comment and list
//! values are comma-separated. Every key is the name of a long flag without
//! the leading dashes (`test-fraction`, `diagonal-mask`, ...; underscores
//! are accepted too). Flags given on the command line override the file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub seed: Option<u64>,
    pub dgp: Option<Vec<String>>,
    pub n: Option<Vec<usize>>,
    pub snr: Option<Vec<f64>>,
    pub reps: Option<usize>,
    pub method: Option<Vec<String>>,
    pub heads: Option<usize>,
    pub lambda: Option<f64>,
    pub rank: Option<usize>,
    pub test_fraction: Option<f64>,
    pub test_size: Option<usize>,
    pub standardize: Option<bool>,
    pub diagonal_mask: Option<bool>,
    pub full: Option<bool>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub target: Option<String>,
    pub exclude: Option<Vec<String>>,
    pub model: Option<PathBuf>,
    pub query: Option<PathBuf>,
    pub key: Option<PathBuf>,
    pub activation: Option<String>,
    pub head: Option<usize>,
    pub no_intercept: Option<bool>,
}

fn scalar<T: FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid value '{value}' for '{key}'")))
}

fn list<T: FromStr>(key: &str, value: &str) -> CliResult<Vec<T>> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| scalar(key, s))
        .collect::<CliResult<_>>()?;
    if items.is_empty() {
        return Err(CliError::Usage(format!("empty list for '{key}'")));
    }
    Ok(items)
}

fn flag(key: &str, value: &str) -> CliResult<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "" | "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(CliError::Usage(format!("invalid boolean '{value}' for '{key}'"))),
    }
}

impl Settings {
    /// Sets one option from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let k = key.as_str();
        match k {
            "seed" => self.seed = Some(scalar(k, value)?),
            "dgp" => self.dgp = Some(list(k, value)?),
            "n" => self.n = Some(list(k, value)?),
            "snr" => self.snr = Some(list(k, value)?),
            "reps" => self.reps = Some(scalar(k, value)?),
            "method" => self.method = Some(list(k, value)?),
            "heads" => self.heads = Some(scalar(k, value)?),
            "lambda" => self.lambda = Some(scalar(k, value)?),
            "rank" => self.rank = Some(scalar(k, value)?),
            "test-fraction" => self.test_fraction = Some(scalar(k, value)?),
            "test-size" => self.test_size = Some(scalar(k, value)?),
            "standardize" => self.standardize = Some(flag(k, value)?),
            "diagonal-mask" => self.diagonal_mask = Some(flag(k, value)?),
            "full" => self.full = Some(flag(k, value)?),
            "threads" => self.threads = Some(scalar(k, value)?),
            "out" => self.out = Some(PathBuf::from(value.trim())),
            "target" => self.target = Some(value.trim().to_string()),
            "exclude" => self.exclude = Some(list(k, value)?),
            "model" => self.model = Some(PathBuf::from(value.trim())),
            "query" => self.query = Some(PathBuf::from(value.trim())),
            "key" => self.key = Some(PathBuf::from(value.trim())),
            "activation" => self.activation = Some(value.trim().to_ascii_lowercase()),
            "head" => self.head = Some(scalar(k, value)?),
            "no-intercept" => self.no_intercept = Some(flag(k, value)?),
            _ => return Err(CliError::Usage(format!("unknown option '{key}'"))),
        }
        Ok(())
    }

    pub fn parse_config(text: &str) -> CliResult<Self> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected 'key = value'", i + 1))
            })?;
            s.set(key, value)
                .map_err(|e| CliError::Usage(format!("config line {}: {e}", i + 1)))?;
        }
        Ok(s)
    }

    pub fn read_config(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
        Self::parse_config(&text)
    }

    /// Values set in `over` win.
    pub fn overridden_by(self, over: Settings) -> Settings {
        macro_rules! pick {
            ($($f:ident),*) => { Settings { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            seed, dgp, n, snr, reps, method, heads, lambda, rank, test_fraction, test_size,
            standardize, diagonal_mask, full, threads, out, target, exclude, model, query, key,
            activation, head, no_intercept
        )
    }
}
