//! Box-constrained multi-start minimization.

use crate::error::{Error, Result};
use crate::model::ParamBox;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // unused when a dependency links std
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub starts: usize,
    pub max_iterations: usize,
    /// Tolerance on the sup norm of the projected gradient.
    pub gradient_tolerance: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { starts: 8, max_iterations: 200, gradient_tolerance: 1e-9 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.starts == 0 || self.max_iterations == 0 {
            return Err(Error::invalid("optimizer needs at least one start and one iteration"));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::invalid("gradient tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartStatus {
    /// Projected gradient below tolerance.
    Converged,
    /// No decrease was found along a descent direction; the point is
    /// stationary up to rounding.
    Stalled,
    IterationLimit,
    /// The objective failed (for example a non-finite ODE state) at the start.
    Failed,
}

impl StartStatus {
    pub fn is_success(self) -> bool {
        matches!(self, StartStatus::Converged | StartStatus::Stalled)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartReport {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub status: StartStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerDiagnostics {
    pub starts: Vec<StartReport>,
    /// Index of the reported start.
    pub best: usize,
    /// Whether the reported point sits on the boundary of the box.
    pub boundary_hit: bool,
}

impl OptimizerDiagnostics {
    pub fn iterations(&self) -> usize {
        self.starts[self.best].iterations
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub diagnostics: OptimizerDiagnostics,
}

/// `i`-th point (1-based) of the van der Corput sequence in `base`.
fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// The first `count` Halton points mapped into the box.
pub fn halton_starts(bounds: &ParamBox, count: usize) -> Vec<Vec<f64>> {
    (1..=count as u64)
        .map(|i| {
            let unit: Vec<f64> =
                (0..bounds.dim()).map(|d| radical_inverse(i, PRIMES[d % PRIMES.len()])).collect();
            bounds.from_unit(&unit)
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn projected_gradient_norm(bounds: &ParamBox, x: &[f64], g: &[f64]) -> f64 {
    let mut step: Vec<f64> = x.iter().zip(g).map(|(x, g)| x - g).collect();
    bounds.project(&mut step);
    x.iter().zip(&step).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Projected BFGS from one start with an Armijo backtracking search along the
/// projected path.
fn descend<F>(objective: &mut F, bounds: &ParamBox, start: &[f64], cfg: &OptimizerConfig) -> StartReport
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let p = start.len();
    let mut x = start.to_vec();
    bounds.project(&mut x);
    let failed = |x: &[f64]| StartReport {
        start: start.to_vec(),
        end: x.to_vec(),
        value: f64::NAN,
        iterations: 0,
        status: StartStatus::Failed,
    };
    let (mut f, mut g) = match objective(&x) {
        Ok(v) if v.0.is_finite() && v.1.iter().all(|g| g.is_finite()) => v,
        _ => return failed(&x),
    };
    let identity = |p: usize| {
        let mut h = vec![0.0; p * p];
        for i in 0..p {
            h[i * p + i] = 1.0;
        }
        h
    };
    let mut inv_hessian = identity(p);
    let mut status = StartStatus::IterationLimit;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        if projected_gradient_norm(bounds, &x, &g) <= cfg.gradient_tolerance {
            status = StartStatus::Converged;
            break;
        }
        iterations += 1;
        // Variables pinned at a bound with the gradient pushing outward are
        // held fixed for this step.
        let free: Vec<bool> = (0..p)
            .map(|i| {
                let at_lower = x[i] <= bounds.lower()[i] && g[i] > 0.0;
                let at_upper = x[i] >= bounds.upper()[i] && g[i] < 0.0;
                !(at_lower || at_upper)
            })
            .collect();
        let mut d: Vec<f64> = (0..p)
            .map(|i| {
                if !free[i] {
                    return 0.0;
                }
                -(0..p).filter(|&j| free[j]).map(|j| inv_hessian[i * p + j] * g[j]).sum::<f64>()
            })
            .collect();
        if dot(&d, &g) >= 0.0 {
            inv_hessian = identity(p);
            d = (0..p).map(|i| if free[i] { -g[i] } else { 0.0 }).collect();
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-20 {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(x, d)| x + alpha * d).collect();
            bounds.project(&mut trial);
            let moved: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            if moved.iter().all(|v| *v == 0.0) {
                break;
            }
            if let Ok((ft, gt)) = objective(&trial) {
                if ft.is_finite() && gt.iter().all(|v| v.is_finite()) && ft <= f + 1e-4 * dot(&g, &moved) {
                    accepted = Some((trial, ft, gt, moved));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((trial, ft, gt, s)) = accepted else {
            status = StartStatus::Stalled;
            break;
        };
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            // H ← (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..p).map(|i| (0..p).map(|j| inv_hessian[i * p + j] * y[j]).sum()).collect();
            let yhy = dot(&y, &hy);
            for i in 0..p {
                for j in 0..p {
                    inv_hessian[i * p + j] +=
                        -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        x = trial;
        f = ft;
        g = gt;
    }
    StartReport { start: start.to_vec(), end: x, value: f, iterations, status }
}

/// Minimizes `objective` over the box from Halton starts and reports the
/// best successful start. Equal minima are not disambiguated.
pub fn minimize_in_box<F>(mut objective: F, bounds: &ParamBox, cfg: &OptimizerConfig) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    cfg.validate()?;
    let reports: Vec<StartReport> = halton_starts(bounds, cfg.starts)
        .iter()
        .map(|s| descend(&mut objective, bounds, s, cfg))
        .collect();
    let best = reports
        .iter()
        .enumerate()
        .filter(|(_, r)| r.status.is_success())
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value))
        .map(|(i, _)| i)
        .ok_or(Error::OptimizationFailed { starts: reports.len() })?;
    let point = reports[best].end.clone();
    let boundary_hit =
        point.iter().enumerate().any(|(i, v)| *v <= bounds.lower()[i] || *v >= bounds.upper()[i]);
    Ok(Minimum {
        value: reports[best].value,
        point,
        diagnostics: OptimizerDiagnostics { starts: reports, best, boundary_hit },
    })
}

/// Central differences with step `1e-5·(1 + |θ_i|)`, one-sided at the box
/// boundary.
pub fn numeric_gradient<F>(f: &mut F, bounds: &ParamBox, theta: &[f64]) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut grad = Vec::with_capacity(theta.len());
    let mut probe = theta.to_vec();
    for i in 0..theta.len() {
        let h = 1e-5 * (1.0 + theta[i].abs());
        let up = (theta[i] + h).min(bounds.upper()[i]);
        let down = (theta[i] - h).max(bounds.lower()[i]);
        probe[i] = up;
        let fu = f(&probe)?;
        probe[i] = down;
        let fd = f(&probe)?;
        probe[i] = theta[i];
        grad.push((fu - fd) / (up - down));
    }
    Ok(grad)
}
