//! Simulation designs: six regression functions on `[0,1]^5` with Gaussian
//! noise calibrated to a target signal-to-noise ratio.
//!
//! Randomness comes from `ChaCha20Rng` (rand_chacha 0.9) seeded through
//! `SeedableRng::seed_from_u64`. Uniform predictors are drawn row by row with
//! `Rng::random::<f64>()`, then all noise draws follow from the same stream
//! via `rand_distr::StandardNormal`.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::linalg::DesignMatrix;
use crate::{fmt_f64, Error, Result};

/// Number of predictors in every design.
pub const DIMENSION: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DgpKind {
    Linear,
    Friedman1,
    Friedman2,
    Friedman3,
    RotatedSine,
    SoftRadial,
}

impl DgpKind {
    pub const ALL: [DgpKind; 6] = [
        DgpKind::Linear,
        DgpKind::Friedman1,
        DgpKind::Friedman2,
        DgpKind::Friedman3,
        DgpKind::RotatedSine,
        DgpKind::SoftRadial,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DgpKind::Linear => "linear",
            DgpKind::Friedman1 => "friedman1",
            DgpKind::Friedman2 => "friedman2",
            DgpKind::Friedman3 => "friedman3",
            DgpKind::RotatedSine => "rotated_sine",
            DgpKind::SoftRadial => "soft_radial",
        }
    }

    pub fn index(&self) -> usize {
        Self::ALL.iter().position(|k| k == self).unwrap()
    }
}

impl fmt::Display for DgpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DgpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown DGP '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DgpSpec {
    pub kind: DgpKind,
}

impl DgpSpec {
    pub fn new(kind: DgpKind) -> Self {
        Self { kind }
    }

    pub fn dimension(&self) -> usize {
        DIMENSION
    }
}

/// True when every coordinate lies in `[0,1]`.
pub fn in_support(x: &[f64]) -> bool {
    x.iter().all(|v| (0.0..=1.0).contains(v))
}

/// Evaluates the regression function. Defined on all of ℝ⁵; see
/// [`in_support`] for the intended domain.
///
/// # Panics
///
/// If `x` does not have exactly five entries.
pub fn eval_f(spec: &DgpSpec, x: &[f64]) -> f64 {
    assert_eq!(x.len(), DIMENSION, "DGP input must have five coordinates");
    match spec.kind {
        DgpKind::Linear => {
            2.0 * (x[0] - 0.5) - (x[1] - 0.5)
                + 3.0 * (x[2] - 0.5)
                + 1.5 * (x[3] - 0.5)
                + 0.5 * (x[4] - 0.5)
        }
        DgpKind::Friedman1 => {
            10.0 * (PI * x[0] * x[1]).sin() + 20.0 * (x[2] - 0.5).powi(2) + 10.0 * x[3] + 5.0 * x[4]
        }
        DgpKind::Friedman2 => (PI * (x[0] + x[1] + x[2])).sin() + (1.0 + x[3] * x[3]).ln(),
        DgpKind::Friedman3 => x[0] * x[1] + (x[2] + x[3] + 2.0).ln(),
        DgpKind::RotatedSine => (3.0 * x[..4].iter().sum::<f64>()).sin(),
        DgpKind::SoftRadial => {
            let r2: f64 = x.iter().map(|v| (v - 0.5).powi(2)).sum();
            1.0 / (1.0 + 5.0 * r2)
        }
    }
}

/// Best attainable R² under the noise calibration, `SNR / (SNR + 1)`.
pub fn r2_max(snr: f64) -> f64 {
    snr / (snr + 1.0)
}

fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

fn draw_inputs(rng: &mut ChaCha20Rng, n: usize) -> DMatrix<f64> {
    let data: Vec<f64> = (0..n * DIMENSION).map(|_| rng.random::<f64>()).collect();
    DMatrix::from_row_slice(n, DIMENSION, &data)
}

fn signal_of(spec: &DgpSpec, x: &DMatrix<f64>) -> DVector<f64> {
    let mut row = [0.0; DIMENSION];
    DVector::from_iterator(
        x.nrows(),
        (0..x.nrows()).map(|i| {
            for (k, r) in row.iter_mut().enumerate() {
                *r = x[(i, k)];
            }
            eval_f(spec, &row)
        }),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedDataset {
    pub spec: DgpSpec,
    pub x: DesignMatrix,
    pub y: DVector<f64>,
    pub signal: DVector<f64>,
    /// `σ²`, the sample variance of the signal divided by the SNR.
    pub noise_variance: f64,
    pub snr: f64,
    pub seed: u64,
}

impl SimulatedDataset {
    /// CSV with header `x1,..,x5,y,signal` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x1,x2,x3,x4,x5,y,signal")?;
        let x = self.x.values();
        for i in 0..x.nrows() {
            let mut fields: Vec<String> = (0..DIMENSION).map(|k| fmt_f64(x[(i, k)])).collect();
            fields.push(fmt_f64(self.y[i]));
            fields.push(fmt_f64(self.signal[i]));
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// Draws `n` training observations with noise variance `Var(f) / snr`.
pub fn generate(spec: &DgpSpec, n: usize, snr: f64, seed: u64) -> Result<SimulatedDataset> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need n >= 2, got {n}")));
    }
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(Error::InvalidArgument(format!("SNR must be positive, got {snr}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let x = draw_inputs(&mut rng, n);
    let signal = signal_of(spec, &x);
    let variance = sample_variance(signal.as_slice());
    if !(variance >= 1e-12) {
        return Err(Error::DegenerateSignal { variance });
    }
    let noise_variance = variance / snr;
    let sigma = noise_variance.sqrt();
    let y = DVector::from_iterator(
        n,
        signal
            .iter()
            .map(|s| s + sigma * rng.sample::<f64, _>(StandardNormal)),
    );
    Ok(SimulatedDataset {
        spec: *spec,
        x: DesignMatrix::new(x)?,
        y,
        signal,
        noise_variance,
        snr,
        seed,
    })
}

/// A held-out sample whose noise is scaled later by a training `σ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub x: DesignMatrix,
    pub signal: DVector<f64>,
    /// Standard normal draws; outcomes are `signal + σ · standard_noise`.
    pub standard_noise: DVector<f64>,
}

impl TestSet {
    pub fn outcomes(&self, noise_variance: f64) -> DVector<f64> {
        &self.signal + &self.standard_noise * noise_variance.sqrt()
    }
}

pub fn generate_test_set(spec: &DgpSpec, j: usize, seed: u64) -> Result<TestSet> {
    if j < 2 {
        return Err(Error::InvalidArgument(format!("need a test size >= 2, got {j}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let x = draw_inputs(&mut rng, j);
    let signal = signal_of(spec, &x);
    let standard_noise =
        DVector::from_iterator(j, (0..j).map(|_| rng.sample::<f64, _>(StandardNormal)));
    Ok(TestSet {
        x: DesignMatrix::new(x)?,
        signal,
        standard_noise,
    })
}
