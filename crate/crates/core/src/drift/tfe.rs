use super::optimize::{minimize_in_box, OptimizerConfig};
use super::{check_observations, ContrastEvaluation, DriftEstimate, DriftMethod};
use crate::averaging::{aligned_cells, solve_averaged_ode, solve_with_sensitivity, AveragedSystem, DEFAULT_CELLS};
use crate::error::Result;
use crate::model::ParamBox;
use crate::sim::ObservationSeries;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TfeOptions {
    /// Minimum RK4 resolution on `[0, T]`; rounded up to a multiple of `n`.
    pub ode_steps: usize,
    pub optimizer: OptimizerConfig,
}

impl Default for TfeOptions {
    fn default() -> Self {
        TfeOptions { ode_steps: DEFAULT_CELLS, optimizer: OptimizerConfig::default() }
    }
}

/// `U(θ) = Σ_{k=1}^n |x_{t_k} − X̄^θ_{t_k}|²`, with `∇U = −2 Σ (∇_θX̄_{t_k})ᵀ r_k`
/// when requested.
pub fn tfe_contrast(
    avg: &dyn AveragedSystem,
    theta: &[f64],
    obs: &ObservationSeries,
    ode_steps: usize,
    with_gradient: bool,
) -> Result<ContrastEvaluation> {
    check_observations(avg, obs)?;
    let n = obs.n();
    let steps = aligned_cells(n, ode_steps);
    let stride = steps / n;
    let m = avg.dim();
    if with_gradient {
        let (ode, sens) = solve_with_sensitivity(avg, theta, obs.horizon(), steps)?;
        let mut value = 0.0;
        let mut grad = vec![0.0; theta.len()];
        for k in 1..=n {
            let (x, xb) = (obs.at(k), ode.state(k * stride));
            for a in 0..m {
                let r = x[a] - xb[a];
                value += r * r;
                for (j, g) in grad.iter_mut().enumerate() {
                    *g -= 2.0 * sens[k * stride][(a, j)] * r;
                }
            }
        }
        Ok(ContrastEvaluation { theta: theta.to_vec(), value, gradient: Some(grad) })
    } else {
        let ode = solve_averaged_ode(avg, theta, obs.horizon(), steps)?;
        let value = (1..=n)
            .map(|k| obs.at(k).iter().zip(ode.state(k * stride)).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
            .sum();
        Ok(ContrastEvaluation { theta: theta.to_vec(), value, gradient: None })
    }
}

/// `argmin_{θ ∈ Θ̄} U(θ)` by multi-start projected quasi-Newton descent.
pub fn estimate_tfe(
    avg: &dyn AveragedSystem,
    obs: &ObservationSeries,
    bounds: &ParamBox,
    opts: &TfeOptions,
) -> Result<DriftEstimate> {
    check_observations(avg, obs)?;
    if bounds.dim() != avg.param_dim() {
        return Err(crate::Error::DimensionMismatch { expected: avg.param_dim(), got: bounds.dim() });
    }
    let objective = |theta: &[f64]| -> Result<(f64, Vec<f64>)> {
        let c = tfe_contrast(avg, theta, obs, opts.ode_steps, true)?;
        Ok((c.value, c.gradient.unwrap_or_default()))
    };
    let min = minimize_in_box(objective, bounds, &opts.optimizer)?;
    Ok(DriftEstimate {
        point: min.point,
        method: DriftMethod::Tfe,
        contrast: min.value,
        covariance: None,
        diagnostics: min.diagnostics,
    })
}
