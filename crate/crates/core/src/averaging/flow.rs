//! The limit ODE, its linearization and parameter sensitivities.
//!
//! All quantities live on one uniform grid `t_i = iT/M`. The one-step maps
//! `Φ_i = Z(t_{i+1}, t_i)` are the exact Jacobians of the RK4 step, so the
//! discrete fundamental matrices compose exactly and agree with the
//! variational sensitivities to rounding.

use super::AveragedSystem;
use crate::error::{Error, Result};
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
#[allow(unused_imports)] // unused when a dependency links std
use num_traits::Float;

/// `X̄^θ` on the uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    horizon: f64,
    steps: usize,
    dim: usize,
    theta: Vec<f64>,
    states: Vec<f64>,
}

impl OdeSolution {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn step_size(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.horizon * i as f64 / self.steps as f64
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    /// Grid index of `t`, if `t` is a node.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let x = t / self.horizon * self.steps as f64;
        let i = x.round();
        if i < 0.0 || i > self.steps as f64 || (x - i).abs() > 1e-9 * (1.0 + x.abs()) {
            return Err(Error::OffGrid(t));
        }
        Ok(i as usize)
    }
}

/// Stage states of one RK4 step and the resulting next state.
fn rk4_stages(avg: &dyn AveragedSystem, theta: &[f64], x: &[f64], h: f64) -> ([Vec<f64>; 4], Vec<f64>) {
    let m = x.len();
    let mut k = [vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]];
    let mut xs = [x.to_vec(), vec![0.0; m], vec![0.0; m], vec![0.0; m]];
    let fractions = [0.5, 0.5, 1.0];
    for s in 0..4 {
        let (done, rest) = k.split_at_mut(s);
        avg.c_bar(theta, &xs[s], &mut rest[0]);
        let _ = done;
        if s < 3 {
            for a in 0..m {
                xs[s + 1][a] = x[a] + fractions[s] * h * k[s][a];
            }
        }
    }
    let next = (0..m)
        .map(|a| x[a] + h / 6.0 * (k[0][a] + 2.0 * k[1][a] + 2.0 * k[2][a] + k[3][a]))
        .collect();
    (xs, next)
}

fn check_grid(horizon: f64, steps: usize) -> Result<()> {
    if steps == 0 {
        return Err(Error::invalid("ODE grid needs at least one step"));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid(alloc::format!("horizon must be positive, got {horizon}")));
    }
    Ok(())
}

fn check_theta(avg: &dyn AveragedSystem, theta: &[f64]) -> Result<()> {
    if theta.len() != avg.param_dim() {
        return Err(Error::DimensionMismatch { expected: avg.param_dim(), got: theta.len() });
    }
    Ok(())
}

/// Classical RK4 for `X̄' = c̄_θ(X̄)`, `X̄_0 = x₀`, with `steps` uniform steps.
pub fn solve_averaged_ode(avg: &dyn AveragedSystem, theta: &[f64], horizon: f64, steps: usize) -> Result<OdeSolution> {
    check_grid(horizon, steps)?;
    check_theta(avg, theta)?;
    let m = avg.dim();
    let h = horizon / steps as f64;
    let mut states = Vec::with_capacity((steps + 1) * m);
    states.extend_from_slice(avg.initial());
    let mut x = avg.initial().to_vec();
    for i in 0..steps {
        let (_, next) = rk4_stages(avg, theta, &x, h);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: i + 1 });
        }
        states.extend_from_slice(&next);
        x = next;
    }
    Ok(OdeSolution { horizon, steps, dim: m, theta: theta.to_vec(), states })
}

/// RK4 on the augmented system `(X̄, S)` with `S' = ∇ₓc̄ S + ∇_θc̄`, `S_0 = 0`.
/// `S_i` is the exact derivative of the discrete `X̄_i` with respect to `θ`.
pub fn solve_with_sensitivity(
    avg: &dyn AveragedSystem,
    theta: &[f64],
    horizon: f64,
    steps: usize,
) -> Result<(OdeSolution, Vec<DMatrix<f64>>)> {
    check_grid(horizon, steps)?;
    check_theta(avg, theta)?;
    let (m, p) = (avg.dim(), avg.param_dim());
    let h = horizon / steps as f64;
    let mut states = Vec::with_capacity((steps + 1) * m);
    states.extend_from_slice(avg.initial());
    let mut sens = Vec::with_capacity(steps + 1);
    let mut s = DMatrix::zeros(m, p);
    sens.push(s.clone());
    let mut x = avg.initial().to_vec();
    let fractions = [0.5, 0.5, 1.0];
    for i in 0..steps {
        let (xs, next) = rk4_stages(avg, theta, &x, h);
        let mut ks: Vec<DMatrix<f64>> = Vec::with_capacity(4);
        let mut stage_s = s.clone();
        for st in 0..4 {
            let k = avg.grad_x(theta, &xs[st]) * &stage_s + avg.grad_theta(theta, &xs[st]);
            if st < 3 {
                stage_s = &s + &k * (fractions[st] * h);
            }
            ks.push(k);
        }
        s += (&ks[0] + &ks[1] * 2.0 + &ks[2] * 2.0 + &ks[3]) * (h / 6.0);
        if next.iter().any(|v| !v.is_finite()) || s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: i + 1 });
        }
        states.extend_from_slice(&next);
        sens.push(s.clone());
        x = next;
    }
    Ok((OdeSolution { horizon, steps, dim: m, theta: theta.to_vec(), states }, sens))
}

/// `Z(t_i, t_j)` on the ODE grid.
///
/// Stores the one-step maps, products forward from and backward to anchor
/// nodes spaced `stride` apart, and the anchor-to-anchor maps; any `Z(t_i,
/// t_j)` is then a short product through the semigroup relation.
#[derive(Debug, Clone)]
pub struct FundamentalMatrixCache {
    dim: usize,
    steps: usize,
    horizon: f64,
    stride: usize,
    step_maps: Vec<DMatrix<f64>>,
    /// `Z(t_i, t_{anchor ≤ i})`.
    forward: Vec<DMatrix<f64>>,
    /// `Z(t_{anchor ≥ j}, t_j)`.
    backward: Vec<DMatrix<f64>>,
    /// `Z(a_{k+1}, a_k)`.
    anchors: Vec<DMatrix<f64>>,
}

impl FundamentalMatrixCache {
    pub fn new(avg: &dyn AveragedSystem, ode: &OdeSolution) -> Result<Self> {
        let stride = (ode.steps() as f64).sqrt().ceil().max(1.0) as usize;
        Self::with_stride(avg, ode, stride)
    }

    pub fn with_stride(avg: &dyn AveragedSystem, ode: &OdeSolution, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::invalid("anchor stride must be positive"));
        }
        let (m, steps) = (ode.dim(), ode.steps());
        let h = ode.step_size();
        let theta = ode.theta();
        let id = DMatrix::<f64>::identity(m, m);
        let fractions = [0.5, 0.5, 1.0];
        let mut step_maps = Vec::with_capacity(steps);
        for i in 0..steps {
            let (xs, _) = rk4_stages(avg, theta, ode.state(i), h);
            let mut stage = id.clone();
            let mut acc = id.clone();
            for st in 0..4 {
                let k = avg.grad_x(theta, &xs[st]) * &stage;
                let weight = if st == 0 || st == 3 { 1.0 } else { 2.0 };
                acc += &k * (weight * h / 6.0);
                if st < 3 {
                    stage = &id + &k * (fractions[st] * h);
                }
            }
            if acc.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { step: i + 1 });
            }
            step_maps.push(acc);
        }

        let mut forward = Vec::with_capacity(steps + 1);
        for i in 0..=steps {
            if i % stride == 0 {
                forward.push(id.clone());
            } else {
                let prev: &DMatrix<f64> = &forward[i - 1];
                forward.push(&step_maps[i - 1] * prev);
            }
        }
        let mut backward = vec![id.clone(); steps + 1];
        for j in (0..steps).rev() {
            if j % stride != 0 {
                let next_anchor_here = (j + 1) % stride == 0 || j + 1 == steps;
                backward[j] = if next_anchor_here {
                    step_maps[j].clone()
                } else {
                    &backward[j + 1] * &step_maps[j]
                };
            }
        }
        let anchor_count = steps.div_ceil(stride);
        let mut anchors = Vec::with_capacity(anchor_count);
        for k in 0..anchor_count {
            let start = k * stride;
            let end = ((k + 1) * stride).min(steps);
            let mut z = id.clone();
            for i in start..end {
                z = &step_maps[i] * z;
            }
            anchors.push(z);
        }
        Ok(FundamentalMatrixCache {
            dim: m,
            steps,
            horizon: ode.horizon(),
            stride,
            step_maps,
            forward,
            backward,
            anchors,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `Φ_i = Z(t_{i+1}, t_i)`.
    pub fn step_map(&self, i: usize) -> &DMatrix<f64> {
        &self.step_maps[i]
    }

    pub fn step_maps(&self) -> &[DMatrix<f64>] {
        &self.step_maps
    }

    /// `Z(t_i, t_j)` for `i ≥ j`.
    pub fn z(&self, i: usize, j: usize) -> Result<DMatrix<f64>> {
        if i > self.steps || j > i {
            return Err(Error::invalid(alloc::format!(
                "Z(t_{i}, t_{j}) needs j <= i <= {}",
                self.steps
            )));
        }
        let m = self.dim;
        if i == j {
            return Ok(DMatrix::identity(m, m));
        }
        let (ka, kb) = (i / self.stride, j.div_ceil(self.stride));
        if kb > ka {
            // Same block: no anchor in (j, i].
            let mut z = DMatrix::identity(m, m);
            for s in j..i {
                z = &self.step_maps[s] * z;
            }
            return Ok(z);
        }
        let mut z = self.backward[j].clone();
        for k in kb..ka {
            z = &self.anchors[k] * z;
        }
        Ok(&self.forward[i] * z)
    }

    /// `Z(t_i, 0) Z(t_j, 0)⁻¹`; an independent route for cross-checks.
    pub fn z_by_inversion(&self, i: usize, j: usize) -> Result<DMatrix<f64>> {
        let zi = self.z(i, 0)?;
        let zj = self.z(j, 0)?;
        let inv = zj
            .try_inverse()
            .ok_or_else(|| Error::Singular(alloc::format!("Z(t_{j}, 0) is not invertible")))?;
        Ok(zi * inv)
    }
}

/// `∇_θX̄_{t_i} = ∫₀^{t_i} Z(t_i, s) ∇_θc̄(X̄_s) ds` by the trapezoid rule on
/// the grid, evaluated recursively through the one-step maps.
pub fn theta_sensitivity(
    avg: &dyn AveragedSystem,
    ode: &OdeSolution,
    cache: &FundamentalMatrixCache,
) -> Result<Vec<DMatrix<f64>>> {
    if cache.steps() != ode.steps() || cache.dim() != ode.dim() {
        return Err(Error::invalid("fundamental matrix cache does not match the ODE grid"));
    }
    let theta = ode.theta();
    let h = ode.step_size();
    let g: Vec<DMatrix<f64>> = (0..=ode.steps()).map(|i| avg.grad_theta(theta, ode.state(i))).collect();
    let mut out = Vec::with_capacity(ode.steps() + 1);
    let mut s = DMatrix::zeros(ode.dim(), avg.param_dim());
    out.push(s.clone());
    for i in 0..ode.steps() {
        let phi = cache.step_map(i);
        s = phi * (&s + &g[i] * (0.5 * h)) + &g[i + 1] * (0.5 * h);
        out.push(s.clone());
    }
    Ok(out)
}
