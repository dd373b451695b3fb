use super::optimize::{minimize_in_box, numeric_gradient, OptimizerConfig};
use super::{check_observations, ContrastEvaluation, DriftEstimate, DriftMethod};
use crate::averaging::{
    aligned_cells, solve_averaged_ode, AveragedSystem, FluctuationModel, FundamentalMatrixCache, DEFAULT_CELLS,
};
use crate::error::{Error, Result};
use crate::fbm::HurstIndex;
use crate::linalg::{cholesky_with_jitter, min_eigenvalue};
use crate::model::ParamBox;
use crate::sim::ObservationSeries;
use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cell::RefCell;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiConfig {
    /// Minimum number of kernel cells on `[0, T]`; rounded up to a multiple
    /// of `n`.
    pub cells: usize,
    /// `λ = lim √η/√ε`.
    pub lambda: f64,
}

impl Default for XiConfig {
    fn default() -> Self {
        XiConfig { cells: DEFAULT_CELLS, lambda: 0.0 }
    }
}

/// `Ξ^{θ,H,n}`: the `nm × nm` covariance of `(ξ_{t_1}, …, ξ_{t_n})`.
#[derive(Debug, Clone, PartialEq)]
pub struct XiMatrix {
    pub matrix: DMatrix<f64>,
    pub theta: Vec<f64>,
    pub hurst: HurstIndex,
    pub n: usize,
    pub horizon: f64,
    pub cells: usize,
    pub min_eigenvalue: f64,
    /// `X̄^θ_{t_k}`, `k = 1..n`, stacked.
    pub mean: Vec<f64>,
}

/// Relative eigenvalue floor: `λ_min ≥ −10⁻¹⁰ · trace / (nm)`.
const XI_FLOOR: f64 = 1e-10;

pub fn build_xi(
    avg: &dyn AveragedSystem,
    theta: &[f64],
    hurst: HurstIndex,
    n: usize,
    horizon: f64,
    cfg: &XiConfig,
) -> Result<XiMatrix> {
    if n == 0 {
        return Err(Error::invalid("Ξ needs at least one observation time"));
    }
    let cells = aligned_cells(n, cfg.cells);
    let ode = solve_averaged_ode(avg, theta, horizon, cells)?;
    let cache = FundamentalMatrixCache::new(avg, &ode)?;
    let model = FluctuationModel::from_parts(avg, &ode, cache, hurst, cfg.lambda)?;
    let matrix = model.block_covariance(n)?;
    let dim = matrix.nrows();
    let min = min_eigenvalue(&matrix);
    let floor = -XI_FLOOR * matrix.trace().abs() / dim as f64;
    if !(min >= floor) {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min, floor });
    }
    let stride = cells / n;
    let mean = (1..=n).flat_map(|k| ode.state(k * stride).to_vec()).collect();
    Ok(XiMatrix { matrix, theta: theta.to_vec(), hurst, n, horizon, cells, min_eigenvalue: min, mean })
}

/// Cholesky factor of `Ξ` with the jitter that was needed, and `X̄` at the
/// observation times.
#[derive(Debug, Clone)]
pub struct XiFactor {
    pub cholesky: Cholesky<f64, Dyn>,
    pub jitter: f64,
    pub mean: Vec<f64>,
}

impl XiMatrix {
    pub fn factor(&self) -> Result<XiFactor> {
        let (cholesky, jitter) = cholesky_with_jitter(&self.matrix)?;
        Ok(XiFactor { cholesky, jitter, mean: self.mean.clone() })
    }
}

impl XiFactor {
    /// `rᵀ Ξ⁻¹ r` for `r = ⊕(x_{t_k} − X̄_{t_k})`.
    pub fn quadratic_form(&self, obs: &ObservationSeries) -> Result<f64> {
        let m = obs.dim();
        let n = obs.n();
        if n * m != self.mean.len() {
            return Err(Error::DimensionMismatch { expected: self.mean.len(), got: n * m });
        }
        let r = DVector::from_iterator(n * m, (1..=n).flat_map(|k| obs.at(k).iter().copied()).zip(&self.mean).map(|(x, y)| x - y));
        let solved = self.cholesky.solve(&r);
        Ok(r.dot(&solved))
    }
}

/// `Ũ(θ) = rᵀ Ξ⁻¹ r` with `Ξ` built at `θ`; solved through the Cholesky
/// factor.
pub fn mce_contrast(
    avg: &dyn AveragedSystem,
    theta: &[f64],
    obs: &ObservationSeries,
    xi: &XiMatrix,
) -> Result<ContrastEvaluation> {
    check_observations(avg, obs)?;
    if xi.theta != theta {
        return Err(Error::invalid("Ξ was built at a different θ"));
    }
    if xi.n != obs.n() || xi.horizon != obs.horizon() {
        return Err(Error::invalid("Ξ was built for a different observation grid"));
    }
    let value = xi.factor()?.quadratic_form(obs)?;
    Ok(ContrastEvaluation { theta: theta.to_vec(), value, gradient: None })
}

/// Exact-bit key for a cached factorization.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct XiKey {
    pub theta: Vec<u64>,
    pub hurst: u64,
    pub lambda: u64,
    pub horizon: u64,
    pub n: usize,
    pub cells: usize,
}

impl XiKey {
    pub fn new(theta: &[f64], hurst: HurstIndex, n: usize, horizon: f64, cfg: &XiConfig) -> Self {
        XiKey {
            theta: theta.iter().map(|v| v.to_bits()).collect(),
            hurst: hurst.value().to_bits(),
            lambda: cfg.lambda.to_bits(),
            horizon: horizon.to_bits(),
            n,
            cells: aligned_cells(n, cfg.cells),
        }
    }
}

/// Storage for factorized `Ξ`. One store must only ever serve a single
/// averaged system.
pub trait XiStore {
    fn get(&self, key: &XiKey) -> Option<Arc<XiFactor>>;
    fn insert(&self, key: XiKey, value: Arc<XiFactor>);
}

/// Single-threaded store.
#[derive(Debug, Default)]
pub struct LocalXiStore(RefCell<BTreeMap<XiKey, Arc<XiFactor>>>);

impl LocalXiStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.0.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl XiStore for LocalXiStore {
    fn get(&self, key: &XiKey) -> Option<Arc<XiFactor>> {
        self.0.borrow().get(key).cloned()
    }

    fn insert(&self, key: XiKey, value: Arc<XiFactor>) {
        self.0.borrow_mut().insert(key, value);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MceOptions {
    pub xi: XiConfig,
    pub optimizer: OptimizerConfig,
}

/// `argmin_{θ ∈ Θ̄} Ũ(θ; 𝓗)`. `Ξ` is rebuilt at every candidate `θ` (or
/// taken from `store`); gradients are central differences.
pub fn estimate_mce(
    avg: &dyn AveragedSystem,
    obs: &ObservationSeries,
    hurst_param: HurstIndex,
    bounds: &ParamBox,
    opts: &MceOptions,
    store: &dyn XiStore,
) -> Result<DriftEstimate> {
    check_observations(avg, obs)?;
    if bounds.dim() != avg.param_dim() {
        return Err(Error::DimensionMismatch { expected: avg.param_dim(), got: bounds.dim() });
    }
    let (n, horizon) = (obs.n(), obs.horizon());
    let mut value = |theta: &[f64]| -> Result<f64> {
        let key = XiKey::new(theta, hurst_param, n, horizon, &opts.xi);
        let factor = match store.get(&key) {
            Some(f) => f,
            None => {
                let f = Arc::new(build_xi(avg, theta, hurst_param, n, horizon, &opts.xi)?.factor()?);
                store.insert(key, f.clone());
                f
            }
        };
        factor.quadratic_form(obs)
    };
    let objective = |theta: &[f64]| -> Result<(f64, Vec<f64>)> {
        let v = value(theta)?;
        let g = numeric_gradient(&mut value, bounds, theta)?;
        Ok((v, g))
    };
    let min = minimize_in_box(objective, bounds, &opts.optimizer)?;
    Ok(DriftEstimate {
        point: min.point,
        method: DriftMethod::Mce,
        contrast: min.value,
        covariance: None,
        diagnostics: min.diagnostics,
    })
}
