//! Limited-memory BFGS with a strong Wolfe line search.
//!
//! The search direction comes from the usual two-loop recursion over the
//! last `memory` curvature pairs, with the initial inverse Hessian scaled by
//! `s'y / y'y` of the newest pair. Steps are chosen by the bracketing and
//! zoom procedure of Nocedal & Wright (Algorithms 3.5 and 3.6) with a
//! safeguarded cubic interpolation.

use std::collections::VecDeque;

use crate::{Error, Result};

/// A smooth objective over a flat parameter vector.
pub trait Objective {
    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// Override when value and gradient share work.
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.value(x), self.gradient(x))
    }
}

/// Adapts a pair of closures to [`Objective`].
pub struct FnObjective<F, G> {
    pub value: F,
    pub gradient: G,
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when the infinity norm of the gradient falls to this level.
    pub grad_tol: f64,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub max_line_search_steps: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iterations: 500,
            grad_tol: 1e-8,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            max_line_search_steps: 40,
        }
    }
}

impl LbfgsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.wolfe_c1, self.wolfe_c2
            )));
        }
        if self.memory == 0 || self.max_line_search_steps == 0 {
            return Err(Error::InvalidArgument(
                "memory and max_line_search_steps must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradientTol,
    ImprovementStall,
    MaxIterations,
    LineSearchFailure,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::GradientTol => "gradient_tol",
            StopReason::ImprovementStall => "improvement_stall",
            StopReason::MaxIterations => "max_iterations",
            StopReason::LineSearchFailure => "line_search_failure",
        }
    }
}

/// Objective value and gradient infinity norm at an accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub value: f64,
    pub grad_inf_norm: f64,
}

/// Line-search data of an accepted step, `φ(α) = f(x + α d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: f64,
    pub phi0: f64,
    pub dphi0: f64,
    pub phi: f64,
    pub dphi: f64,
}

impl StepRecord {
    pub fn satisfies_strong_wolfe(&self, c1: f64, c2: f64) -> bool {
        self.phi <= self.phi0 + c1 * self.step * self.dphi0 && self.dphi.abs() <= -c2 * self.dphi0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult {
    pub solution: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
    /// Starting point first, then one entry per accepted iteration.
    pub history: Vec<IterationRecord>,
    pub steps: Vec<StepRecord>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

struct CurvaturePair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// `-H g` by the two-loop recursion.
fn search_direction(grad: &[f64], pairs: &VecDeque<CurvaturePair>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for pair in pairs.iter().rev() {
        let a = pair.rho * dot(&pair.s, &q);
        q.iter_mut().zip(&pair.y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some(last) = pairs.back() {
        let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
        q.iter_mut().for_each(|qi| *qi *= gamma);
    }
    for (pair, a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = pair.rho * dot(&pair.y, &q);
        q.iter_mut().zip(&pair.s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

struct Trial {
    step: f64,
    x: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
    dphi: f64,
}

struct LineSearch<'a, O: Objective> {
    objective: &'a O,
    x: &'a [f64],
    dir: &'a [f64],
    phi0: f64,
    dphi0: f64,
    c1: f64,
    c2: f64,
    budget: usize,
}

impl<O: Objective> LineSearch<'_, O> {
    fn eval(&mut self, step: f64) -> Option<Trial> {
        if self.budget == 0 {
            return None;
        }
        self.budget -= 1;
        let x: Vec<f64> = self
            .x
            .iter()
            .zip(self.dir)
            .map(|(xi, di)| xi + step * di)
            .collect();
        let (value, grad) = self.objective.value_and_gradient(&x);
        let dphi = dot(&grad, self.dir);
        Some(Trial {
            step,
            x,
            value,
            grad,
            dphi,
        })
    }

    fn finite(t: &Trial) -> bool {
        t.value.is_finite() && t.dphi.is_finite() && all_finite(&t.grad)
    }

    fn armijo_fails(&self, t: &Trial) -> bool {
        t.value > self.phi0 + self.c1 * t.step * self.dphi0
    }

    fn curvature_holds(&self, t: &Trial) -> bool {
        t.dphi.abs() <= -self.c2 * self.dphi0
    }

    fn search(mut self, initial_step: f64) -> Option<Trial> {
        let mut prev = Trial {
            step: 0.0,
            x: self.x.to_vec(),
            value: self.phi0,
            grad: Vec::new(),
            dphi: self.dphi0,
        };
        let mut step = initial_step;
        let mut first = true;
        loop {
            let t = self.eval(step)?;
            if !Self::finite(&t) {
                // overshoot into a non-finite region: treat as too long
                return self.zoom(prev, t);
            }
            if self.armijo_fails(&t) || (!first && t.value >= prev.value) {
                return self.zoom(prev, t);
            }
            if self.curvature_holds(&t) {
                return Some(t);
            }
            if t.dphi >= 0.0 {
                return self.zoom(t, prev);
            }
            first = false;
            step = 2.0 * t.step;
            prev = t;
        }
    }

    fn interpolate(lo: &Trial, hi: &Trial) -> Option<f64> {
        if !(Self::finite(hi)) {
            return None;
        }
        let d1 = lo.dphi + hi.dphi - 3.0 * (lo.value - hi.value) / (lo.step - hi.step);
        let disc = d1 * d1 - lo.dphi * hi.dphi;
        if !(disc >= 0.0) {
            return None;
        }
        let d2 = (hi.step - lo.step).signum() * disc.sqrt();
        let a = hi.step - (hi.step - lo.step) * (hi.dphi + d2 - d1) / (hi.dphi - lo.dphi + 2.0 * d2);
        a.is_finite().then_some(a)
    }

    fn zoom(&mut self, mut lo: Trial, mut hi: Trial) -> Option<Trial> {
        loop {
            let (a, b) = (lo.step.min(hi.step), lo.step.max(hi.step));
            let width = b - a;
            if !(width > f64::EPSILON * b.max(1e-300)) {
                return None;
            }
            let mid = 0.5 * (a + b);
            let step = match Self::interpolate(&lo, &hi) {
                Some(s) if s >= a + 0.1 * width && s <= b - 0.1 * width => s,
                _ => mid,
            };
            let t = self.eval(step)?;
            // values within rounding of each other: let the derivative decide
            let noise = 8.0 * f64::EPSILON * lo.value.abs().max(self.phi0.abs());
            if !Self::finite(&t) || self.armijo_fails(&t) || t.value > lo.value + noise {
                hi = t;
            } else {
                if self.curvature_holds(&t) {
                    return Some(t);
                }
                if t.dphi * (hi.step - lo.step) >= 0.0 {
                    hi = lo;
                }
                lo = t;
            }
        }
    }
}

/// Minimizes a smooth objective from `x0`.
///
/// Besides the gradient tolerance and iteration cap, iteration stops once the
/// relative decrease `(f_k - f_{k+1}) / |f_k|` stays below `stall_tol` for
/// `patience` consecutive accepted steps. A failed line search after the
/// first iteration ends the run with the best iterate so far.
pub fn minimize<O: Objective>(
    objective: &O,
    x0: &[f64],
    config: &LbfgsConfig,
    stall_tol: f64,
    patience: usize,
) -> Result<MinimizeResult> {
    config.validate()?;
    let mut x = x0.to_vec();
    let (mut f, mut g) = objective.value_and_gradient(&x);
    if g.len() != x.len() {
        return Err(Error::DimensionMismatch(format!(
            "gradient has length {}, parameters {}",
            g.len(),
            x.len()
        )));
    }
    if !f.is_finite() || !all_finite(&g) {
        return Err(Error::NonFiniteObjective);
    }

    let mut history = vec![IterationRecord {
        value: f,
        grad_inf_norm: inf_norm(&g),
    }];
    let mut steps = Vec::new();
    let mut pairs: VecDeque<CurvaturePair> = VecDeque::with_capacity(config.memory);
    let mut stalled = 0usize;
    let mut iterations = 0usize;

    let finish = |x: Vec<f64>, f, iterations, stop_reason, history, steps| MinimizeResult {
        solution: x,
        value: f,
        iterations,
        stop_reason,
        history,
        steps,
    };

    if inf_norm(&g) <= config.grad_tol {
        return Ok(finish(x, f, 0, StopReason::GradientTol, history, steps));
    }

    while iterations < config.max_iterations {
        let mut accepted = None;
        // second attempt falls back to steepest descent with memory cleared
        for attempt in 0..2 {
            if attempt == 1 {
                if pairs.is_empty() {
                    break;
                }
                pairs.clear();
            }
            let mut dir = search_direction(&g, &pairs);
            let mut dphi0 = dot(&g, &dir);
            if !(dphi0 < 0.0) || !all_finite(&dir) {
                pairs.clear();
                dir = g.iter().map(|v| -v).collect();
                dphi0 = -dot(&g, &g);
            }
            let initial_step = if pairs.is_empty() {
                (1.0 / norm(&g)).min(1.0)
            } else {
                1.0
            };
            let ls = LineSearch {
                objective,
                x: &x,
                dir: &dir,
                phi0: f,
                dphi0,
                c1: config.wolfe_c1,
                c2: config.wolfe_c2,
                budget: config.max_line_search_steps,
            };
            if let Some(t) = ls.search(initial_step) {
                accepted = Some((t, dphi0));
                break;
            }
        }

        let Some((trial, dphi0)) = accepted else {
            if iterations == 0 {
                return Err(Error::LineSearchFailure);
            }
            return Ok(finish(x, f, iterations, StopReason::LineSearchFailure, history, steps));
        };

        steps.push(StepRecord {
            step: trial.step,
            phi0: f,
            dphi0,
            phi: trial.value,
            dphi: trial.dphi,
        });
        let s: Vec<f64> = trial.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = trial.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if pairs.len() == config.memory {
                pairs.pop_front();
            }
            pairs.push_back(CurvaturePair { s, y, rho: 1.0 / sy });
        }

        let improvement = (f - trial.value) / f.abs().max(f64::MIN_POSITIVE);
        x = trial.x;
        f = trial.value;
        g = trial.grad;
        iterations += 1;
        let grad_inf_norm = inf_norm(&g);
        history.push(IterationRecord {
            value: f,
            grad_inf_norm,
        });

        if grad_inf_norm <= config.grad_tol {
            return Ok(finish(x, f, iterations, StopReason::GradientTol, history, steps));
        }
        if improvement < stall_tol {
            stalled += 1;
            if stalled >= patience {
                return Ok(finish(x, f, iterations, StopReason::ImprovementStall, history, steps));
            }
        } else {
            stalled = 0;
        }
    }
    Ok(finish(x, f, iterations, StopReason::MaxIterations, history, steps))
}

/// Convenience wrapper taking the objective and its gradient as closures.
pub fn minimize_fns<F, G>(
    value: F,
    gradient: G,
    x0: &[f64],
    config: &LbfgsConfig,
    stall_tol: f64,
    patience: usize,
) -> Result<MinimizeResult>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    minimize(&FnObjective { value, gradient }, x0, config, stall_tol, patience)
}
