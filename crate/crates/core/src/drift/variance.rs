use super::mce::{build_xi, XiConfig};
use crate::averaging::{aligned_cells, solve_with_sensitivity, AveragedSystem, FluctuationModel, FundamentalMatrixCache};
use crate::error::{Error, Result};
use crate::fbm::HurstIndex;
use crate::linalg::{cholesky_with_jitter, spd_inverse, symmetric_eigenvalues, symmetrize};
use alloc::vec::Vec;
use nalgebra::DMatrix;

/// Eigenvalue floor for `M − Mᴴ ⪰ 0`.
pub const PSD_FLOOR: f64 = -1e-10;

fn sandwich(bread_inv: &DMatrix<f64>, middle: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = bread_inv * middle * bread_inv;
    symmetrize(&mut out);
    out
}

/// `M(θ, H; n) = B⁻¹ (Σ_{j,k} G_jᵀ E[ξ_{t_j}ξ_{t_k}ᵀ] G_k) B⁻¹`,
/// `B = Σ_k G_kᵀ G_k`, `G_k = ∇_θX̄_{t_k}`.
pub fn tfe_variance(
    avg: &dyn AveragedSystem,
    theta: &[f64],
    hurst: HurstIndex,
    n: usize,
    horizon: f64,
    cfg: &XiConfig,
) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::invalid("M(n) needs n ≥ 1"));
    }
    let cells = aligned_cells(n, cfg.cells);
    let (ode, sens) = solve_with_sensitivity(avg, theta, horizon, cells)?;
    let cache = FundamentalMatrixCache::new(avg, &ode)?;
    let model = FluctuationModel::from_parts(avg, &ode, cache, hurst, cfg.lambda)?;
    let stride = cells / n;
    let g: Vec<DMatrix<f64>> = (1..=n).map(|k| sens[k * stride].clone()).collect();
    let p = avg.param_dim();
    let bread = g.iter().fold(DMatrix::zeros(p, p), |acc, gk| acc + gk.transpose() * gk);
    let bread_inv = spd_inverse(&bread, "the information term Σ (∇_θX̄)ᵀ∇_θX̄")?;
    Ok(sandwich(&bread_inv, &model.discrete_middle(n, &g)?))
}

/// `M̄(θ, H) = lim_n M(θ, H; n)`: the same sandwich with both sums replaced by
/// integrals over `[0, T]`, on `cfg.cells` nodes.
pub fn tfe_variance_limit(
    avg: &dyn AveragedSystem,
    theta: &[f64],
    hurst: HurstIndex,
    horizon: f64,
    cfg: &XiConfig,
) -> Result<DMatrix<f64>> {
    let cells = cfg.cells.max(1);
    let (ode, sens) = solve_with_sensitivity(avg, theta, horizon, cells)?;
    let cache = FundamentalMatrixCache::new(avg, &ode)?;
    let model = FluctuationModel::from_parts(avg, &ode, cache, hurst, cfg.lambda)?;
    let p = avg.param_dim();
    let h = ode.step_size();
    let mut bread = DMatrix::zeros(p, p);
    for (i, g) in sens.iter().enumerate() {
        let w = if i == 0 || i == cells { 0.5 * h } else { h };
        bread += g.transpose() * g * w;
    }
    let bread_inv = spd_inverse(&bread, "the information term ∫ (∇_θX̄)ᵀ∇_θX̄")?;
    Ok(sandwich(&bread_inv, &model.integrated_middle(&sens)?))
}

/// `Mᴴ(θ, H; n) = A⁻¹ (Gᵀ Ξ_𝓗⁻¹ Ξ_H Ξ_𝓗⁻¹ G) A⁻¹`, `A = Gᵀ Ξ_𝓗⁻¹ G`, with
/// `G` the stacked `∇_θX̄_{t_k}`.
pub fn mce_variance(
    avg: &dyn AveragedSystem,
    theta: &[f64],
    hurst_true: HurstIndex,
    hurst_param: HurstIndex,
    n: usize,
    horizon: f64,
    cfg: &XiConfig,
) -> Result<DMatrix<f64>> {
    let xi_param = build_xi(avg, theta, hurst_param, n, horizon, cfg)?;
    let cells = xi_param.cells;
    let (_, sens) = solve_with_sensitivity(avg, theta, horizon, cells)?;
    let (m, p) = (avg.dim(), avg.param_dim());
    let stride = cells / n;
    let g = DMatrix::from_fn(n * m, p, |r, c| sens[(r / m + 1) * stride][(r % m, c)]);
    let (chol, _) = cholesky_with_jitter(&xi_param.matrix)?;
    let w = chol.solve(&g);
    let info = g.transpose() * &w;
    let info_inv = spd_inverse(&info, "the information term Gᵀ Ξ⁻¹ G")?;
    if hurst_true == hurst_param {
        let mut out = info_inv;
        symmetrize(&mut out);
        return Ok(out);
    }
    let xi_true = build_xi(avg, theta, hurst_true, n, horizon, cfg)?;
    let middle = w.transpose() * &xi_true.matrix * &w;
    Ok(sandwich(&info_inv, &middle))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceComparison {
    /// Eigenvalues of `M − Mᴴ`, ascending.
    pub eigenvalues: Vec<f64>,
    pub min_eigenvalue: f64,
    pub passed: bool,
}

/// Checks `M − Mᴴ ⪰ 0` against [`PSD_FLOOR`].
pub fn variance_comparison(m: &DMatrix<f64>, m_h: &DMatrix<f64>) -> Result<VarianceComparison> {
    if m.shape() != m_h.shape() || m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: m_h.nrows() });
    }
    let mut diff = m - m_h;
    symmetrize(&mut diff);
    let eigenvalues: Vec<f64> = symmetric_eigenvalues(&diff).iter().copied().collect();
    let min_eigenvalue = eigenvalues.first().copied().unwrap_or(0.0);
    Ok(VarianceComparison { passed: min_eigenvalue >= PSD_FLOOR, eigenvalues, min_eigenvalue })
}
