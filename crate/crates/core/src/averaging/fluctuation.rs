//! Covariance of the fluctuation limit
//! `ξ_t = ∫₀ᵗ Z(t,s) σ̄ dW̃^H_s + λ ∫₀ᵗ Z(t,s) Σ_Φ(X̄_s) dB̃_s`.
//!
//! The fBm part is discretized on uniform cells of width `h`. The smooth
//! factor `Z(t,s)σ̄` is replaced on each cell by its endpoint average, while
//! the singular kernel `H(2H−1)|s₁−s₂|^{2H−2}` is integrated exactly over each
//! cell pair, which gives `h^{2H} γ(|c−c'|)` with `γ` the unit fGn
//! autocovariance. With `Z ≡ 1` the scheme reproduces `t^{2H}` exactly.
//! The Brownian part uses the trapezoid rule on the same nodes.

use super::flow::{FundamentalMatrixCache, OdeSolution};
use super::AveragedSystem;
use crate::error::{Error, Result};
use crate::fbm::{fgn_autocovariance, HurstIndex};
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
#[allow(unused_imports)] // unused when a dependency links std
use num_traits::Float;

/// Default number of kernel cells on `[0, T]`.
pub const DEFAULT_CELLS: usize = 512;

/// Smallest multiple of `n` that is at least `cells`, so that every
/// observation time is a cell boundary.
pub fn aligned_cells(n: usize, cells: usize) -> usize {
    let n = n.max(1);
    n * cells.max(1).div_ceil(n)
}

/// `∫_{cell c}∫_{cell c+d} H(2H−1)|s₁−s₂|^{2H−2} = h^{2H}γ(d)` for `d < cells`.
pub fn kernel_weights(hurst: HurstIndex, cell_width: f64, cells: usize) -> Vec<f64> {
    let scale = cell_width.powf(2.0 * hurst.value());
    (0..cells).map(|d| scale * fgn_autocovariance(d, hurst)).collect()
}

/// Everything needed to evaluate `E[ξ_{t₁} ξ_{t₂}ᵀ]` on one grid.
///
/// The ODE grid and the kernel cells coincide.
#[derive(Debug, Clone)]
pub struct FluctuationModel {
    dim: usize,
    noise_dim: usize,
    param_dim: usize,
    cells: usize,
    horizon: f64,
    hurst: HurstIndex,
    lambda: f64,
    weights: Vec<f64>,
    sigma_bar: DMatrix<f64>,
    /// `Σ_Φ Σ_Φᵀ` at every node, present when `λ > 0`.
    brownian: Option<Vec<DMatrix<f64>>>,
    cache: FundamentalMatrixCache,
}

impl FluctuationModel {
    /// Solves the limit ODE with `cells` RK4 steps and prepares the kernel.
    pub fn new(
        avg: &dyn AveragedSystem,
        theta: &[f64],
        hurst: HurstIndex,
        lambda: f64,
        horizon: f64,
        cells: usize,
    ) -> Result<Self> {
        let ode = super::solve_averaged_ode(avg, theta, horizon, cells)?;
        let cache = FundamentalMatrixCache::new(avg, &ode)?;
        Self::from_parts(avg, &ode, cache, hurst, lambda)
    }

    pub fn from_parts(
        avg: &dyn AveragedSystem,
        ode: &OdeSolution,
        cache: FundamentalMatrixCache,
        hurst: HurstIndex,
        lambda: f64,
    ) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(alloc::format!("λ must be a finite non-negative number, got {lambda}")));
        }
        if cache.steps() != ode.steps() || cache.dim() != ode.dim() {
            return Err(Error::invalid("fundamental matrix cache does not match the ODE grid"));
        }
        let sigma_bar = avg.sigma_bar().clone();
        if sigma_bar.nrows() != ode.dim() {
            return Err(Error::DimensionMismatch { expected: ode.dim(), got: sigma_bar.nrows() });
        }
        let brownian = if lambda > 0.0 {
            let mut list = Vec::with_capacity(ode.steps() + 1);
            for i in 0..=ode.steps() {
                let s = avg.sigma_phi(ode.theta(), ode.state(i)).ok_or_else(|| {
                    Error::invalid("λ > 0 needs the Poisson-equation diffusion Σ_Φ, which this system does not provide")
                })?;
                list.push(&s * s.transpose());
            }
            Some(list)
        } else {
            None
        };
        let cells = ode.steps();
        Ok(FluctuationModel {
            dim: ode.dim(),
            noise_dim: sigma_bar.ncols(),
            param_dim: avg.param_dim(),
            cells,
            horizon: ode.horizon(),
            hurst,
            lambda,
            weights: kernel_weights(hurst, ode.step_size(), cells),
            sigma_bar,
            brownian,
            cache,
        })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn hurst(&self) -> HurstIndex {
        self.hurst
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn cache(&self) -> &FundamentalMatrixCache {
        &self.cache
    }

    fn cell_width(&self) -> f64 {
        self.horizon / self.cells as f64
    }

    fn node_of(&self, t: f64) -> Result<usize> {
        let x = t / self.horizon * self.cells as f64;
        let i = x.round();
        if !(i >= 0.0 && i <= self.cells as f64) || (x - i).abs() > 1e-9 * (1.0 + x.abs()) {
            return Err(Error::OffGrid(t));
        }
        Ok(i as usize)
    }

    /// `Z(t_a, t_i)` for `i = 0..=a`.
    fn propagators_to(&self, a: usize) -> Vec<DMatrix<f64>> {
        let m = self.dim;
        let mut z = vec![DMatrix::identity(m, m); a + 1];
        for i in (0..a).rev() {
            z[i] = &z[i + 1] * self.cache.step_map(i);
        }
        z
    }

    /// Cell factors `½(Z(t,s_c) + Z(t,s_{c+1}))σ̄`, flattened row-major
    /// (`m × m̃` per cell).
    fn cell_factors(&self, z: &[DMatrix<f64>], out: &mut Vec<f64>) {
        let (m, q) = (self.dim, self.noise_dim);
        for c in 0..z.len() - 1 {
            let avg = (&z[c] + &z[c + 1]) * 0.5 * &self.sigma_bar;
            for a in 0..m {
                for k in 0..q {
                    out.push(avg[(a, k)]);
                }
            }
        }
    }

    /// `Σ_{c∈A, c'∈B} W(|c−c'|) e(c) f(c')ᵀ` accumulated into `out` (`m × m`).
    fn kernel_sum(&self, e: &[f64], cells_e: core::ops::Range<usize>, f: &[f64], cells_f: core::ops::Range<usize>, out: &mut [f64]) {
        let (m, q) = (self.dim, self.noise_dim);
        let stride = m * q;
        let mut mixed = vec![0.0; stride];
        for c in cells_e.clone() {
            // Y(c) = Σ_{c'} W f(c'), then out += e(c) Y(c)ᵀ.
            mixed.fill(0.0);
            for cp in cells_f.clone() {
                let w = self.weights[c.abs_diff(cp)];
                let row = &f[cp * stride..(cp + 1) * stride];
                for (y, v) in mixed.iter_mut().zip(row) {
                    *y += w * v;
                }
            }
            let ec = &e[c * stride..(c + 1) * stride];
            for a in 0..m {
                for b in 0..m {
                    let mut acc = 0.0;
                    for k in 0..q {
                        acc += ec[a * q + k] * mixed[b * q + k];
                    }
                    out[a * m + b] += acc;
                }
            }
        }
    }

    /// `E[ξ_{t₁} ξ_{t₂}ᵀ]`; both times must be grid nodes.
    pub fn covariance(&self, t1: f64, t2: f64) -> Result<DMatrix<f64>> {
        let (i1, i2) = (self.node_of(t1)?, self.node_of(t2)?);
        // One evaluation path for both orders keeps the symmetry exact.
        let (a, b) = if i1 >= i2 { (i1, i2) } else { (i2, i1) };
        let c = self.covariance_nodes(a, b);
        Ok(if i1 >= i2 { c } else { c.transpose() })
    }

    fn covariance_nodes(&self, a: usize, b: usize) -> DMatrix<f64> {
        let m = self.dim;
        if b == 0 {
            return DMatrix::zeros(m, m);
        }
        let za = self.propagators_to(a);
        let zb = self.propagators_to(b);
        let mut ea = Vec::new();
        let mut eb = Vec::new();
        self.cell_factors(&za, &mut ea);
        self.cell_factors(&zb, &mut eb);
        let mut flat = vec![0.0; m * m];
        self.kernel_sum(&ea, 0..a, &eb, 0..b, &mut flat);
        let mut out = DMatrix::from_row_slice(m, m, &flat);
        if let Some(p) = &self.brownian {
            let half = 0.5 * self.cell_width() * self.lambda * self.lambda;
            for c in 0..b {
                out += (&za[c] * &p[c] * zb[c].transpose() + &za[c + 1] * &p[c + 1] * zb[c + 1].transpose()) * half;
            }
        }
        if a == b {
            crate::linalg::symmetrize(&mut out);
        }
        out
    }

    /// The `nm × nm` matrix of blocks `E[ξ_{t_j} ξ_{t_k}ᵀ]`, `t_k = kT/n`,
    /// `k = 1..n`. `n` must divide the cell count. Exactly symmetric.
    pub fn block_covariance(&self, n: usize) -> Result<DMatrix<f64>> {
        if n == 0 || self.cells % n != 0 {
            return Err(Error::NotDivisible { fine: self.cells, n });
        }
        let m = self.dim;
        let b = self.cells / n;
        let stride = m * self.noise_dim;

        // Cell factors relative to the right end of their block, and the
        // Brownian block increments.
        let mut e = Vec::with_capacity(self.cells * stride);
        let mut brownian_blocks = Vec::new();
        let mut block_maps = Vec::with_capacity(n);
        for l in 0..n {
            let lo = l * b;
            let mut z = vec![DMatrix::identity(m, m); b + 1];
            for i in (0..b).rev() {
                z[i] = &z[i + 1] * self.cache.step_map(lo + i);
            }
            self.cell_factors(&z, &mut e);
            if let Some(p) = &self.brownian {
                let half = 0.5 * self.cell_width() * self.lambda * self.lambda;
                let mut d = DMatrix::zeros(m, m);
                for i in 0..b {
                    d += (&z[i] * &p[lo + i] * z[i].transpose() + &z[i + 1] * &p[lo + i + 1] * z[i + 1].transpose()) * half;
                }
                brownian_blocks.push(d);
            }
            block_maps.push(z.swap_remove(0));
        }

        // Block increments E_{l,l'} for l ≥ l'.
        let dim = n * m;
        let mut inc = DMatrix::zeros(dim, dim);
        let mut flat = vec![0.0; m * m];
        for l in 0..n {
            for lp in 0..=l {
                flat.fill(0.0);
                self.kernel_sum(&e, l * b..(l + 1) * b, &e, lp * b..(lp + 1) * b, &mut flat);
                for r in 0..m {
                    for c in 0..m {
                        inc[(l * m + r, lp * m + c)] = flat[r * m + c];
                        inc[(lp * m + c, l * m + r)] = flat[r * m + c];
                    }
                }
            }
            if let Some(d) = brownian_blocks.get(l) {
                let mut blk = inc.view_mut((l * m, l * m), (m, m));
                blk += d;
            }
        }

        // Q_{j,l'} = Φ_j Q_{j−1,l'} + E_{j,l'} for all l'.
        let mut q = inc.clone();
        for j in 1..n {
            let prev = q.rows((j - 1) * m, m).into_owned();
            let mut rows = q.rows_mut(j * m, m);
            rows += &block_maps[j] * prev;
        }
        // Ξ_{j,k} = Ξ_{j,k−1} Φ_kᵀ + Q_{j,k} for k ≤ j, then mirror.
        let mut xi = DMatrix::zeros(dim, dim);
        for j in 0..n {
            for k in 0..=j {
                let mut blk = q.view((j * m, k * m), (m, m)).into_owned();
                if k > 0 {
                    let left = xi.view((j * m, (k - 1) * m), (m, m)).into_owned();
                    blk += left * block_maps[k].transpose();
                }
                xi.view_mut((j * m, k * m), (m, m)).copy_from(&blk);
            }
        }
        for j in 0..n {
            for k in 0..j {
                let blk = xi.view((j * m, k * m), (m, m)).transpose();
                xi.view_mut((k * m, j * m), (m, m)).copy_from(&blk);
            }
            // Diagonal blocks come out symmetric only up to rounding.
            let mut d = xi.view((j * m, j * m), (m, m)).into_owned();
            crate::linalg::symmetrize(&mut d);
            xi.view_mut((j * m, j * m), (m, m)).copy_from(&d);
        }
        Ok(xi)
    }

    /// `∫₀ᵀ∫₀ᵀ g(t₁)ᵀ E[ξ_{t₁} ξ_{t₂}ᵀ] g(t₂) dt₁ dt₂` for `g` given at every
    /// node (`m × p` each), through the adjoint `ψ(s) = ∫_s^T Z(t,s)ᵀ g(t) dt`.
    pub fn integrated_middle(&self, g: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
        let psi = self.adjoint(g)?;
        Ok(self.middle_from_adjoint(&psi[..self.cells], &psi[1..]))
    }

    /// `Σ_{j,k} g_jᵀ E[ξ_{t_j} ξ_{t_k}ᵀ] g_k` over the observation times
    /// `t_k = kT/n`, with `g` given per observation (`k = 1..n`).
    pub fn discrete_middle(&self, n: usize, g: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
        if n == 0 || self.cells % n != 0 {
            return Err(Error::NotDivisible { fine: self.cells, n });
        }
        if g.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: g.len() });
        }
        let b = self.cells / n;
        let (m, p) = (self.dim, self.param_dim);
        // ψ jumps by g_k at t_k: a cell ending at t_k sees the jump, the
        // cell starting there does not.
        let mut left = vec![DMatrix::zeros(m, p); self.cells];
        let mut right = vec![DMatrix::zeros(m, p); self.cells];
        let mut after = DMatrix::zeros(m, p);
        for c in (0..self.cells).rev() {
            let mut end = after;
            if (c + 1) % b == 0 {
                end += &g[(c + 1) / b - 1];
            }
            left[c] = self.cache.step_map(c).transpose() * &end;
            after = left[c].clone();
            right[c] = end;
        }
        Ok(self.middle_from_adjoint(&left, &right))
    }

    fn adjoint(&self, g: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
        if g.len() != self.cells + 1 {
            return Err(Error::DimensionMismatch { expected: self.cells + 1, got: g.len() });
        }
        let (m, p) = (self.dim, self.param_dim);
        let h = self.cell_width();
        let mut psi = vec![DMatrix::zeros(m, p); self.cells + 1];
        for i in (0..self.cells).rev() {
            let phit = self.cache.step_map(i).transpose();
            psi[i] = &phit * (&psi[i + 1] + &g[i + 1] * (0.5 * h)) + &g[i] * (0.5 * h);
        }
        Ok(psi)
    }

    /// `psi_left[c]`, `psi_right[c]`: the adjoint at the two ends of cell `c`.
    fn middle_from_adjoint(&self, psi_left: &[DMatrix<f64>], psi_right: &[DMatrix<f64>]) -> DMatrix<f64> {
        let p = self.param_dim;
        let q = self.noise_dim;
        let stride = q * p;
        // κ̄_c = ½ σ̄ᵀ(ψ_c + ψ_{c+1}), flattened row-major m̃ × p.
        let mut kappa = Vec::with_capacity(self.cells * stride);
        for c in 0..self.cells {
            let k = self.sigma_bar.transpose() * (&psi_left[c] + &psi_right[c]) * 0.5;
            for r in 0..q {
                for s in 0..p {
                    kappa.push(k[(r, s)]);
                }
            }
        }
        let mut out = DMatrix::zeros(p, p);
        let mut mixed = vec![0.0; stride];
        for c in 0..self.cells {
            mixed.fill(0.0);
            for cp in 0..self.cells {
                let w = self.weights[c.abs_diff(cp)];
                for (y, v) in mixed.iter_mut().zip(&kappa[cp * stride..(cp + 1) * stride]) {
                    *y += w * v;
                }
            }
            let kc = &kappa[c * stride..(c + 1) * stride];
            for a in 0..p {
                for b in 0..p {
                    let mut acc = 0.0;
                    for r in 0..q {
                        acc += kc[r * p + a] * mixed[r * p + b];
                    }
                    out[(a, b)] += acc;
                }
            }
        }
        if let Some(pp) = &self.brownian {
            let half = 0.5 * self.cell_width() * self.lambda * self.lambda;
            for c in 0..self.cells {
                out += (psi_left[c].transpose() * &pp[c] * &psi_left[c] + psi_right[c].transpose() * &pp[c + 1] * &psi_right[c]) * half;
            }
        }
        crate::linalg::symmetrize(&mut out);
        out
    }
}

/// `E[ξ_{t₁} ξ_{t₂}ᵀ]` on the grid of `ode`; see [`FluctuationModel`].
pub fn fluctuation_covariance(
    avg: &dyn AveragedSystem,
    ode: &OdeSolution,
    cache: &FundamentalMatrixCache,
    hurst: HurstIndex,
    lambda: f64,
    t1: f64,
    t2: f64,
) -> Result<DMatrix<f64>> {
    FluctuationModel::from_parts(avg, ode, cache.clone(), hurst, lambda)?.covariance(t1, t2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averaging::HalfLinearAverage;
    use crate::fbm::fbm_covariance;
    use crate::model::ConstantSigmaModel;

    struct Frozen {
        sigma: DMatrix<f64>,
    }

    impl AveragedSystem for Frozen {
        fn dim(&self) -> usize {
            1
        }
        fn param_dim(&self) -> usize {
            1
        }
        fn initial(&self) -> &[f64] {
            &[1.0]
        }
        fn c_bar(&self, _: &[f64], _: &[f64], out: &mut [f64]) {
            out[0] = 0.0;
        }
        fn grad_x(&self, _: &[f64], _: &[f64]) -> DMatrix<f64> {
            DMatrix::zeros(1, 1)
        }
        fn grad_theta(&self, _: &[f64], _: &[f64]) -> DMatrix<f64> {
            DMatrix::zeros(1, 1)
        }
        fn sigma_bar(&self) -> &DMatrix<f64> {
            &self.sigma
        }
    }

    fn frozen() -> Frozen {
        Frozen { sigma: DMatrix::from_element(1, 1, 1.0) }
    }

    fn hurst(h: f64) -> HurstIndex {
        HurstIndex::new(h).unwrap()
    }

    fn constant() -> HalfLinearAverage {
        ConstantSigmaModel::new().averaged()
    }

    #[test]
    fn frozen_flow_gives_fbm_covariance() {
        let model = FluctuationModel::new(&frozen(), &[1.0], hurst(0.7), 0.0, 1.0, 64).unwrap();
        for (t1, t2) in [(1.0, 1.0), (0.5, 1.0), (0.25, 0.75), (1.0, 0.125)] {
            let got = model.covariance(t1, t2).unwrap()[(0, 0)];
            let want = fbm_covariance(t1, t2, hurst(0.7)).unwrap();
            assert!((got - want).abs() < 1e-12, "{t1} {t2}: {got} vs {want}");
        }
    }

    #[test]
    fn two_point_block_matrix() {
        let model = FluctuationModel::new(&frozen(), &[1.0], hurst(0.75), 0.0, 1.0, 512).unwrap();
        let xi = model.block_covariance(2).unwrap();
        assert!((xi[(0, 0)] - 0.5f64.powf(1.5)).abs() < 1e-12);
        assert!((xi[(1, 1)] - 1.0).abs() < 1e-12);
        let off = fbm_covariance(0.5, 1.0, hurst(0.75)).unwrap();
        assert!((off - 0.5).abs() < 1e-15);
        assert!((xi[(0, 1)] - off).abs() < 1e-12);
        assert_eq!(xi[(0, 1)], xi[(1, 0)]);
        let one = model.block_covariance(1).unwrap();
        assert!((one[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_model_against_quadrature_oracle() {
        // Adaptive double integration of the defining integral at 30 digits.
        let model = FluctuationModel::new(&constant(), &[1.0], hurst(0.85), 0.0, 1.0, DEFAULT_CELLS).unwrap();
        let c11 = model.covariance(1.0, 1.0).unwrap()[(0, 0)];
        assert!((c11 / 1.690_367_458_202_900_7 - 1.0).abs() < 5e-4, "{c11}");
        let c = model.covariance(1.0, 0.5).unwrap()[(0, 0)];
        assert!((c / 0.758_689_490_177_731_5 - 1.0).abs() < 5e-4, "{c}");
    }

    #[test]
    fn vanishes_at_the_origin_and_is_symmetric() {
        let model = FluctuationModel::new(&constant(), &[1.7], hurst(0.85), 0.3, 1.0, 128).unwrap();
        assert_eq!(model.covariance(0.0, 0.75).unwrap()[(0, 0)], 0.0);
        assert_eq!(model.covariance(0.5, 0.0).unwrap()[(0, 0)], 0.0);
        for (a, b) in [(0.25, 0.75), (1.0, 0.5), (0.375, 0.375)] {
            assert_eq!(model.covariance(a, b).unwrap(), model.covariance(b, a).unwrap().transpose());
        }
        assert!(matches!(model.covariance(0.3, 0.5), Err(Error::OffGrid(_))));
    }

    #[test]
    fn block_matrix_matches_pairwise_evaluation() {
        let model = FluctuationModel::new(&constant(), &[1.2], hurst(0.8), 0.4, 2.0, 96).unwrap();
        let n = 8;
        let xi = model.block_covariance(n).unwrap();
        assert_eq!(xi, xi.transpose());
        for j in 0..n {
            for k in 0..n {
                let t = |i: usize| 2.0 * (i + 1) as f64 / n as f64;
                let direct = model.covariance(t(j), t(k)).unwrap()[(0, 0)];
                assert!((xi[(j, k)] - direct).abs() < 1e-12 * (1.0 + direct.abs()));
            }
        }
        assert!(model.block_covariance(7).is_err());
    }

    #[test]
    fn missing_poisson_diffusion_is_reported() {
        assert!(FluctuationModel::new(&frozen(), &[1.0], hurst(0.8), 0.5, 1.0, 16).is_err());
        assert!(FluctuationModel::new(&frozen(), &[1.0], hurst(0.8), 0.0, 1.0, 16).is_ok());
    }

    #[test]
    fn limit_middle_against_quadrature_oracle() {
        let avg = constant();
        let (ode, g) = crate::averaging::solve_with_sensitivity(&avg, &[1.0], 1.0, 1024).unwrap();
        let cache = FundamentalMatrixCache::new(&avg, &ode).unwrap();
        let model = FluctuationModel::from_parts(&avg, &ode, cache.clone(), hurst(0.85), 0.0).unwrap();
        let mid = model.integrated_middle(&g).unwrap()[(0, 0)];
        assert!((mid / 0.094_039_536_889_430_95 - 1.0).abs() < 1e-3, "{mid}");
        // The Brownian part alone: ∫ψ² θ²X̄²/2 ds.
        let with = FluctuationModel::from_parts(&avg, &ode, cache, hurst(0.85), 1.0).unwrap();
        let brown = with.integrated_middle(&g).unwrap()[(0, 0)] - mid;
        assert!((brown / 0.074_658_003_091_582_82 - 1.0).abs() < 1e-5, "{brown}");
    }

    #[test]
    fn discrete_middle_matches_quadratic_form() {
        let avg = constant();
        let model = FluctuationModel::new(&avg, &[1.0], hurst(0.85), 0.5, 1.0, 60).unwrap();
        let n = 12;
        let g: Vec<DMatrix<f64>> = (1..=n).map(|k| DMatrix::from_element(1, 1, (k as f64 * 0.7).sin())).collect();
        let xi = model.block_covariance(n).unwrap();
        let stacked = DMatrix::from_fn(n, 1, |k, _| g[k][(0, 0)]);
        let form = (stacked.transpose() * xi * &stacked)[(0, 0)];
        let adj = model.discrete_middle(n, &g).unwrap()[(0, 0)];
        assert!((form - adj).abs() < 1e-12 * form.abs().max(1.0), "{form} {adj}");
    }

    #[test]
    fn alignment() {
        assert_eq!(aligned_cells(1000, 512), 1000);
        assert_eq!(aligned_cells(100, 512), 600);
        assert_eq!(aligned_cells(16, 512), 512);
        assert_eq!(aligned_cells(7, 1), 7);
    }
}
