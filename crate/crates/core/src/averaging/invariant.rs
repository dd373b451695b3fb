//! Invariant measure of a scalar fast diffusion `dY = f(Y) dt + τ(Y) dB` and
//! averages against it.
//!
//! The stationary density is `p(y) ∝ τ(y)^{-2} exp(∫₀^y 2f/τ²)`. On the real
//! line the support is truncated where `log p` has fallen 60 below its
//! maximum; on the circle the potential must be periodic.

use super::AveragedSystem;
use crate::error::{Error, Result};
use crate::model::SlowFastModel;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;
use nalgebra::DMatrix;
#[allow(unused_imports)] // unused when a dependency links std
use num_traits::Float;

const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

const LOG_DROP: f64 = 60.0;
const WALK_STEP: f64 = 0.05;
const WALK_LIMIT: f64 = 1e4;
const MAX_CELLS: usize = 1 << 16;
const REL_TOL: f64 = 1e-12;

fn gauss_legendre(a: f64, b: f64, f: &dyn Fn(f64) -> f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GL_NODES.iter().zip(&GL_WEIGHTS).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FastDomain {
    RealLine,
    /// `ℝ / 2πℤ`.
    Circle,
}

/// Discrete approximation `μ ≈ Σ wᵢ δ_{yᵢ}` with `Σ wᵢ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantMeasure {
    domain: FastDomain,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl InvariantMeasure {
    /// Builds `μ` from the generator coefficients.
    pub fn from_generator(f: &dyn Fn(f64) -> f64, tau: &dyn Fn(f64) -> f64, domain: FastDomain) -> Result<Self> {
        let drift = |y: f64| {
            let t = tau(y);
            2.0 * f(y) / (t * t)
        };
        match domain {
            FastDomain::Circle => {
                let total = (0..64)
                    .map(|i| {
                        let a = TAU * i as f64 / 64.0;
                        gauss_legendre(a, a + TAU / 64.0, &drift)
                    })
                    .sum::<f64>();
                let scale = (0..64)
                    .map(|i| {
                        let a = TAU * i as f64 / 64.0;
                        gauss_legendre(a, a + TAU / 64.0, &|y| drift(y).abs())
                    })
                    .sum::<f64>();
                if total.abs() > 1e-8 * (1.0 + scale) {
                    return Err(Error::PeriodicityViolation { mismatch: total });
                }
                Self::refine(domain, 0.0, TAU, &|a, b, cells| log_density_grid(a, b, cells, &drift, tau))
            }
            FastDomain::RealLine => {
                let right = walk(1.0, &drift, tau)?;
                let left = walk(-1.0, &drift, tau)?;
                Self::refine(domain, left, right, &|a, b, cells| log_density_grid(a, b, cells, &drift, tau))
            }
        }
    }

    /// Builds `μ` from a caller-supplied unnormalized density.
    pub fn from_density(density: &dyn Fn(f64) -> f64, domain: FastDomain) -> Result<Self> {
        let log_grid = |a: f64, b: f64, cells: usize| -> Vec<f64> {
            (0..=cells)
                .map(|i| {
                    let d = density(a + (b - a) * i as f64 / cells as f64);
                    if d > 0.0 {
                        d.ln()
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect()
        };
        match domain {
            FastDomain::Circle => {
                let gap = (density(0.0) - density(TAU)).abs();
                if gap > 1e-10 * density(0.0).abs().max(1e-300) {
                    return Err(Error::PeriodicityViolation { mismatch: gap });
                }
                Self::refine(domain, 0.0, TAU, &log_grid)
            }
            FastDomain::RealLine => {
                let extent = |sign: f64| -> Result<f64> {
                    let peak = (0..=200)
                        .map(|i| density(sign * i as f64 * WALK_STEP))
                        .fold(0.0, f64::max)
                        .max(density(0.0));
                    let mut y = 0.0;
                    while y.abs() < WALK_LIMIT {
                        y += sign * WALK_STEP;
                        let d = density(y);
                        if d.is_nan() || d < 0.0 {
                            return Err(Error::NonNormalizable("density is negative or NaN".into()));
                        }
                        if d < peak * (-LOG_DROP).exp() && y.abs() > 10.0 * WALK_STEP {
                            return Ok(y);
                        }
                    }
                    Err(Error::NonNormalizable("density does not decay".into()))
                };
                let (a, b) = (extent(-1.0)?, extent(1.0)?);
                Self::refine(domain, a, b, &log_grid)
            }
        }
    }

    /// `μ` of a model with a scalar fast component.
    pub fn for_model<M: SlowFastModel + ?Sized>(model: &M) -> Result<Self> {
        if model.fast_dim() != 1 {
            return Err(Error::invalid(alloc::format!(
                "invariant measure needs a scalar fast component, got dimension {}",
                model.fast_dim()
            )));
        }
        let f = |y: f64| {
            let mut out = [0.0];
            model.fast_drift(&[y], &mut out);
            out[0]
        };
        let tau = |y: f64| {
            let mut out = [0.0];
            model.fast_diffusion(&[y], &mut out);
            out[0]
        };
        let domain = if model.fast_on_circle() { FastDomain::Circle } else { FastDomain::RealLine };
        Self::from_generator(&f, &tau, domain)
    }

    fn refine(domain: FastDomain, a: f64, b: f64, log_grid: &dyn Fn(f64, f64, usize) -> Vec<f64>) -> Result<Self> {
        let mut cells = 256;
        let mut previous: Option<f64> = None;
        loop {
            let logs = log_grid(a, b, cells);
            let peak = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if !peak.is_finite() {
                return Err(Error::NonNormalizable("density vanishes on the grid".into()));
            }
            let h = (b - a) / cells as f64;
            let (nodes, raw): (Vec<f64>, Vec<f64>) = match domain {
                FastDomain::Circle => (0..cells)
                    .map(|i| (a + h * i as f64, h * (logs[i] - peak).exp()))
                    .unzip(),
                FastDomain::RealLine => (0..=cells)
                    .map(|i| {
                        let simpson = if i == 0 || i == cells {
                            1.0
                        } else if i % 2 == 1 {
                            4.0
                        } else {
                            2.0
                        };
                        (a + h * i as f64, simpson * h / 3.0 * (logs[i] - peak).exp())
                    })
                    .unzip(),
            };
            let mass: f64 = raw.iter().sum();
            if !(mass > 0.0 && mass.is_finite()) {
                return Err(Error::NonNormalizable("zero or infinite mass".into()));
            }
            let log_mass = mass.ln() + peak;
            if let Some(prev) = previous {
                if (log_mass - prev).abs() < REL_TOL || cells >= MAX_CELLS {
                    let weights = raw.iter().map(|w| w / mass).collect();
                    return Ok(InvariantMeasure { domain, nodes, weights });
                }
            }
            previous = Some(log_mass);
            cells *= 2;
        }
    }

    pub fn domain(&self) -> FastDomain {
        self.domain
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫ g dμ`.
    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(y, w)| w * g(*y)).sum()
    }
}

/// `log p` on a uniform grid over `[a, b]` via cumulative Gauss–Legendre.
fn log_density_grid(a: f64, b: f64, cells: usize, drift: &dyn Fn(f64) -> f64, tau: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let h = (b - a) / cells as f64;
    let mut out = Vec::with_capacity(cells + 1);
    let mut v = 0.0;
    for i in 0..=cells {
        let y = a + h * i as f64;
        if i > 0 {
            v += gauss_legendre(y - h, y, drift);
        }
        out.push(v - 2.0 * tau(y).abs().ln());
    }
    out
}

/// Walks from 0 in direction `sign` until `log p` has dropped `LOG_DROP` below
/// its running maximum.
fn walk(sign: f64, drift: &dyn Fn(f64) -> f64, tau: &dyn Fn(f64) -> f64) -> Result<f64> {
    let mut y = 0.0f64;
    let mut v = 0.0;
    let mut peak = -2.0 * tau(0.0).abs().ln();
    while y.abs() < WALK_LIMIT {
        let next = y + sign * WALK_STEP;
        v += sign * gauss_legendre(y.min(next), y.max(next), drift);
        y = next;
        let lp = v - 2.0 * tau(y).abs().ln();
        if lp.is_nan() || lp == f64::INFINITY {
            return Err(Error::NonNormalizable(alloc::format!("log density is NaN at {y}")));
        }
        peak = peak.max(lp);
        if lp < peak - LOG_DROP {
            return Ok(y);
        }
    }
    Err(Error::NonNormalizable(alloc::format!(
        "density has not decayed by |y| = {WALK_LIMIT}"
    )))
}

/// `∫ g dμ` for the invariant measure of `dY = f dt + τ dB`.
pub fn invariant_average(
    f: &dyn Fn(f64) -> f64,
    tau: &dyn Fn(f64) -> f64,
    g: &dyn Fn(f64) -> f64,
    domain: FastDomain,
) -> Result<f64> {
    Ok(InvariantMeasure::from_generator(f, tau, domain)?.expect(g))
}

/// Averaged system obtained by quadrature against `μ` for models without a
/// closed form. Gradients are central differences of `c̄`; `Σ_Φ` is not
/// available.
#[derive(Debug)]
pub struct QuadratureAveraged<'a, M: SlowFastModel + ?Sized> {
    model: &'a M,
    measure: InvariantMeasure,
    sigma_bar: DMatrix<f64>,
}

impl<'a, M: SlowFastModel + ?Sized> QuadratureAveraged<'a, M> {
    pub fn new(model: &'a M) -> Result<Self> {
        let measure = InvariantMeasure::for_model(model)?;
        let (m, q) = (model.slow_dim(), model.noise_dim());
        let mut sigma_bar = DMatrix::zeros(m, q);
        let mut buf = vec![0.0; m * q];
        for (y, w) in measure.nodes().iter().zip(measure.weights()) {
            model.diffusion(&[*y], &mut buf);
            for a in 0..m {
                for j in 0..q {
                    sigma_bar[(a, j)] += w * buf[a * q + j];
                }
            }
        }
        Ok(QuadratureAveraged { model, measure, sigma_bar })
    }

    pub fn measure(&self) -> &InvariantMeasure {
        &self.measure
    }

    fn step(v: f64) -> f64 {
        1e-5 * (1.0 + v.abs())
    }
}

impl<M: SlowFastModel + ?Sized> AveragedSystem for QuadratureAveraged<'_, M> {
    fn dim(&self) -> usize {
        self.model.slow_dim()
    }

    fn param_dim(&self) -> usize {
        self.model.param_box().dim()
    }

    fn initial(&self) -> &[f64] {
        self.model.initial_slow()
    }

    fn c_bar(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        let m = self.dim();
        let mut buf = vec![0.0; m];
        out.fill(0.0);
        for (y, w) in self.measure.nodes().iter().zip(self.measure.weights()) {
            self.model.drift(theta, x, &[*y], &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += w * b;
            }
        }
    }

    fn grad_x(&self, theta: &[f64], x: &[f64]) -> DMatrix<f64> {
        let m = self.dim();
        let mut g = DMatrix::zeros(m, m);
        let (mut plus, mut minus) = (vec![0.0; m], vec![0.0; m]);
        let mut xp = x.to_vec();
        for j in 0..m {
            let h = Self::step(x[j]);
            xp[j] = x[j] + h;
            self.c_bar(theta, &xp, &mut plus);
            xp[j] = x[j] - h;
            self.c_bar(theta, &xp, &mut minus);
            xp[j] = x[j];
            for i in 0..m {
                g[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
        g
    }

    fn grad_theta(&self, theta: &[f64], x: &[f64]) -> DMatrix<f64> {
        let (m, p) = (self.dim(), self.param_dim());
        let mut g = DMatrix::zeros(m, p);
        let (mut plus, mut minus) = (vec![0.0; m], vec![0.0; m]);
        let mut tp = theta.to_vec();
        for j in 0..p {
            let h = Self::step(theta[j]);
            tp[j] = theta[j] + h;
            self.c_bar(&tp, x, &mut plus);
            tp[j] = theta[j] - h;
            self.c_bar(&tp, x, &mut minus);
            tp[j] = theta[j];
            for i in 0..m {
                g[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
        g
    }

    fn sigma_bar(&self) -> &DMatrix<f64> {
        &self.sigma_bar
    }
}
