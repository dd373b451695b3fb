//! The averaged (limit) system and everything built on top of it: the
//! invariant measure of the fast process, the limit ODE `X̄^θ`, its
//! fundamental matrix `Z^θ(t, s)`, parameter sensitivities and the covariance
//! of the Gaussian fluctuation limit `ξ`.

mod flow;
mod fluctuation;
mod invariant;

pub use flow::{
    solve_averaged_ode, solve_with_sensitivity, theta_sensitivity, FundamentalMatrixCache, OdeSolution,
};
pub use fluctuation::{
    aligned_cells, fluctuation_covariance, kernel_weights, FluctuationModel, DEFAULT_CELLS,
};
pub use invariant::{invariant_average, FastDomain, InvariantMeasure, QuadratureAveraged};

use crate::model::{ConstantSigmaModel, VariableSigmaModel};
use core::f64::consts::SQRT_2;
use nalgebra::DMatrix;

/// Coefficients of the limit dynamics `dX̄ = c̄_θ(X̄) dt` and of the
/// fluctuation limit `dξ = ∇ₓc̄ ξ dt + λ Σ_Φ dB̃ + σ̄ dW̃^H`.
pub trait AveragedSystem: Sync {
    /// `m`.
    fn dim(&self) -> usize;

    /// `p = dim Θ`.
    fn param_dim(&self) -> usize;

    fn initial(&self) -> &[f64];

    fn c_bar(&self, theta: &[f64], x: &[f64], out: &mut [f64]);

    /// `∇ₓc̄`, `m × m`.
    fn grad_x(&self, theta: &[f64], x: &[f64]) -> DMatrix<f64>;

    /// `∇_θc̄`, `m × p`.
    fn grad_theta(&self, theta: &[f64], x: &[f64]) -> DMatrix<f64>;

    /// `σ̄ = ∫σ dμ`, `m × m̃`.
    fn sigma_bar(&self) -> &DMatrix<f64>;

    /// `Σ_Φ(x)`, needed only when `λ > 0`. `None` means not available.
    fn sigma_phi(&self, _theta: &[f64], _x: &[f64]) -> Option<DMatrix<f64>> {
        None
    }
}

/// Closed form shared by both built-in models: `c̄ = θx/2`, `σ̄ = 1`.
#[derive(Debug, Clone)]
pub struct HalfLinearAverage {
    x0: [f64; 1],
    sigma_bar: DMatrix<f64>,
    /// `Σ_Φ(θ, x) = phi_scale · θ x`.
    phi_scale: f64,
}

impl HalfLinearAverage {
    fn new(phi_scale: f64) -> Self {
        HalfLinearAverage { x0: [1.0], sigma_bar: DMatrix::from_element(1, 1, 1.0), phi_scale }
    }
}

impl AveragedSystem for HalfLinearAverage {
    fn dim(&self) -> usize {
        1
    }
    fn param_dim(&self) -> usize {
        1
    }
    fn initial(&self) -> &[f64] {
        &self.x0
    }
    fn c_bar(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        out[0] = 0.5 * theta[0] * x[0];
    }
    fn grad_x(&self, theta: &[f64], _x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, 0.5 * theta[0])
    }
    fn grad_theta(&self, _theta: &[f64], x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, 0.5 * x[0])
    }
    fn sigma_bar(&self) -> &DMatrix<f64> {
        &self.sigma_bar
    }
    fn sigma_phi(&self, theta: &[f64], x: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, self.phi_scale * theta[0] * x[0]))
    }
}

impl ConstantSigmaModel {
    /// `c̄ = θx/2` (the OU invariant law is `N(0, 1/2)`), `σ̄ = 1` and, from
    /// `Φ = (θx/2)(y² − 1/2)`, `Σ_Φ = θx/√2`.
    pub fn averaged(&self) -> HalfLinearAverage {
        HalfLinearAverage::new(1.0 / SQRT_2)
    }
}

impl VariableSigmaModel {
    /// `c̄ = θx/2` and `σ̄ = 1`; `c` does not depend on `y`, so `Σ_Φ = 0`.
    pub fn averaged(&self) -> HalfLinearAverage {
        HalfLinearAverage::new(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_check(avg: &dyn AveragedSystem, theta: f64, x: f64) {
        let h = 1e-5;
        let mut plus = [0.0];
        let mut minus = [0.0];
        avg.c_bar(&[theta], &[x + h], &mut plus);
        avg.c_bar(&[theta], &[x - h], &mut minus);
        let fd_x = (plus[0] - minus[0]) / (2.0 * h);
        avg.c_bar(&[theta + h], &[x], &mut plus);
        avg.c_bar(&[theta - h], &[x], &mut minus);
        let fd_t = (plus[0] - minus[0]) / (2.0 * h);
        assert!((avg.grad_x(&[theta], &[x])[(0, 0)] - fd_x).abs() < 1e-8);
        assert!((avg.grad_theta(&[theta], &[x])[(0, 0)] - fd_t).abs() < 1e-8);
    }

    #[test]
    fn builtin_gradients_match_finite_differences() {
        let a = ConstantSigmaModel::new().averaged();
        for (t, x) in [(0.3, 1.0), (1.0, 2.5), (2.9, -0.7)] {
            central_check(&a, t, x);
        }
        let s = a.sigma_phi(&[2.0], &[3.0]).unwrap()[(0, 0)];
        assert!((s - 6.0 / SQRT_2).abs() < 1e-14);
        let v = VariableSigmaModel::new().averaged();
        assert_eq!(v.sigma_phi(&[1.0], &[1.0]).unwrap()[(0, 0)], 0.0);
    }
}
