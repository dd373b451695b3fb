//! Experiment configuration files (TOML). Unknown keys are rejected.
//!
//! See `docs/config.md` for the schema.

use crate::error::{Error, Result};
use crate::registry::BuiltinModel;
use serde::{Deserialize, Serialize};
use slowfast_core::drift::{MceOptions, OptimizerConfig, TfeOptions, XiConfig};
use slowfast_core::sim::STIFFNESS_RATIO;
use slowfast_core::{HurstIndex, ParamBox};
use std::path::{Path, PathBuf};

pub const DESK_REPLICATIONS: usize = 500;
pub const DESK_FINE_STEPS: usize = 100_000;
pub const PAPER_REPLICATIONS: usize = 10_000;
pub const PAPER_FINE_STEPS: usize = 1_000_000;

fn default_horizon() -> f64 {
    1.0
}
fn default_replications() -> usize {
    DESK_REPLICATIONS
}
fn default_fine_steps() -> usize {
    DESK_FINE_STEPS
}
fn default_cells() -> usize {
    slowfast_core::averaging::DEFAULT_CELLS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scale {
    pub epsilon: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Present-but-empty table; `h1 = {}` switches the estimator on.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HurstSpec {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TheoreticalVariance {
    /// `M̄`, the high-frequency limit.
    #[default]
    Limit,
    /// `M(n)` at the cell's `n`.
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TfeSpec {
    #[serde(default = "default_cells")]
    pub ode_steps: usize,
    /// Which covariance supplies the theoretical sd.
    #[serde(default)]
    pub variance: TheoreticalVariance,
    /// `λ` in the theoretical covariance.
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_cells")]
    pub variance_cells: usize,
}

impl Default for TfeSpec {
    fn default() -> Self {
        TfeSpec { ode_steps: default_cells(), variance: TheoreticalVariance::Limit, lambda: 0.0, variance_cells: default_cells() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MceSpec {
    /// Hurst index assumed inside the contrast; defaults to the true one.
    #[serde(default)]
    pub hurst: Option<f64>,
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default)]
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorsSpec {
    #[serde(default)]
    pub h1: Option<HurstSpec>,
    #[serde(default)]
    pub h2: Option<HurstSpec>,
    #[serde(default)]
    pub tfe: Option<TfeSpec>,
    #[serde(default)]
    pub mce: Option<MceSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    #[serde(default = "OptimizerSpec::default_starts")]
    pub starts: usize,
    #[serde(default = "OptimizerSpec::default_iterations")]
    pub max_iterations: usize,
    #[serde(default = "OptimizerSpec::default_tolerance")]
    pub gradient_tolerance: f64,
}

impl OptimizerSpec {
    fn default_starts() -> usize {
        OptimizerConfig::default().starts
    }
    fn default_iterations() -> usize {
        OptimizerConfig::default().max_iterations
    }
    fn default_tolerance() -> f64 {
        OptimizerConfig::default().gradient_tolerance
    }
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        OptimizerSpec { starts: d.starts, max_iterations: d.max_iterations, gradient_tolerance: d.gradient_tolerance }
    }
}

impl From<OptimizerSpec> for OptimizerConfig {
    fn from(s: OptimizerSpec) -> Self {
        OptimizerConfig { starts: s.starts, max_iterations: s.max_iterations, gradient_tolerance: s.gradient_tolerance }
    }
}

/// A Monte Carlo study: every `(ε, η)` pair crossed with every `n`, each
/// cell with `replications` independent trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: String,
    pub theta0: Vec<f64>,
    /// True Hurst index `H₀`.
    pub hurst: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    pub scales: Vec<Scale>,
    /// Observation counts. For `h2` this is the total count `2n`.
    pub n: Vec<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_fine_steps")]
    pub fine_steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub theta_box: Option<BoxSpec>,
    pub estimators: EstimatorsSpec,
    #[serde(default)]
    pub optimizer: OptimizerSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Parse { path: path.to_owned(), message: e.to_string() })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Full-size study: `PAPER_REPLICATIONS` replications and the smallest
    /// multiple of `fine_steps` that reaches `PAPER_FINE_STEPS`, so every `n`
    /// still divides the fine grid.
    pub fn at_paper_scale(mut self) -> Self {
        self.replications = PAPER_REPLICATIONS;
        if self.fine_steps > 0 {
            self.fine_steps *= PAPER_FINE_STEPS.div_ceil(self.fine_steps).max(1);
        }
        self
    }

    pub fn hurst_index(&self) -> Result<HurstIndex> {
        Ok(HurstIndex::new(self.hurst)?)
    }

    pub fn mce_hurst(&self) -> Result<Option<HurstIndex>> {
        match self.estimators.mce {
            Some(spec) => Ok(Some(HurstIndex::new(spec.hurst.unwrap_or(self.hurst))?)),
            None => Ok(None),
        }
    }

    pub fn param_box(&self) -> Result<Option<ParamBox>> {
        match &self.theta_box {
            Some(b) => Ok(Some(ParamBox::new(b.lower.clone(), b.upper.clone())?)),
            None => Ok(None),
        }
    }

    pub fn build_model(&self) -> Result<BuiltinModel> {
        BuiltinModel::by_name(&self.model, self.param_box()?)
    }

    pub fn tfe_options(&self) -> Option<TfeOptions> {
        self.estimators.tfe.map(|s| TfeOptions { ode_steps: s.ode_steps, optimizer: self.optimizer.into() })
    }

    pub fn mce_options(&self) -> Option<MceOptions> {
        self.estimators
            .mce
            .map(|s| MceOptions { xi: XiConfig { cells: s.cells, lambda: s.lambda }, optimizer: self.optimizer.into() })
    }

    /// Checks every invariant the harness relies on.
    pub fn validate(&self) -> Result<()> {
        let model = self.build_model()?;
        self.hurst_index()?;
        self.mce_hurst()?;
        slowfast_core::model::validate_model(model.model(), &self.theta0)?;
        if self.replications == 0 {
            return Err(Error::config("replications must be at least 1"));
        }
        if u32::try_from(self.replications).is_err() {
            return Err(Error::config("replications must fit in 32 bits"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.scales.is_empty() || self.n.is_empty() {
            return Err(Error::config("scales and n must be non-empty"));
        }
        for (i, s) in self.scales.iter().enumerate() {
            if !(s.epsilon > 0.0 && s.epsilon.is_finite() && s.eta > 0.0 && s.eta.is_finite()) {
                return Err(Error::config(format!("scales[{i}] must have positive epsilon and eta")));
            }
            if self.scales[..i].contains(s) {
                return Err(Error::config(format!("scales[{i}] duplicates an earlier entry")));
            }
        }
        for (i, &n) in self.n.iter().enumerate() {
            if n == 0 {
                return Err(Error::config("every n must be positive"));
            }
            if self.n[..i].contains(&n) {
                return Err(Error::config(format!("n = {n} appears twice")));
            }
            if self.fine_steps % n != 0 {
                return Err(Error::config(format!("fine_steps = {} is not divisible by n = {n}", self.fine_steps)));
            }
            if self.estimators.h1.is_some() && (n as f64) <= self.horizon {
                return Err(Error::config(format!("h1 needs n > horizon, got n = {n}")));
            }
            if self.estimators.h2.is_some() && (n < 4 || n % 2 != 0) {
                return Err(Error::config(format!("h2 needs an even total count n >= 4, got {n}")));
            }
        }
        let e = &self.estimators;
        if e.h1.is_none() && e.h2.is_none() && e.tfe.is_none() && e.mce.is_none() {
            return Err(Error::config("no estimator selected"));
        }
        if e.tfe.is_some() || e.mce.is_some() {
            model.require_averaged()?;
        }
        if let Some(t) = e.tfe {
            if t.ode_steps == 0 || t.variance_cells == 0 || !(t.lambda >= 0.0) {
                return Err(Error::config("tfe: ode_steps and variance_cells must be positive and lambda >= 0"));
            }
        }
        if let Some(m) = e.mce {
            if m.cells == 0 || !(m.lambda >= 0.0) {
                return Err(Error::config("mce: cells must be positive and lambda >= 0"));
            }
        }
        OptimizerConfig::from(self.optimizer).validate()?;
        Ok(())
    }

    /// Human-readable notes about cells outside the regimes the theory covers.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let dt = self.horizon / self.fine_steps as f64;
        for s in &self.scales {
            if s.eta < STIFFNESS_RATIO * dt {
                out.push(format!(
                    "eta = {} is below {STIFFNESS_RATIO}·dt = {}; the explicit scheme barely resolves the fast process",
                    s.eta,
                    STIFFNESS_RATIO * dt
                ));
            }
        }
        if matches!(self.estimators.tfe, Some(TfeSpec { variance: TheoreticalVariance::Limit, .. })) {
            for s in &self.scales {
                for &n in &self.n {
                    let guard = (s.epsilon.sqrt() + s.eta.sqrt()) * n as f64 / self.horizon;
                    if guard >= 1.0 {
                        out.push(format!(
                            "eps = {}, eta = {}, n = {n}: (sqrt(eps) + sqrt(eta))/dt = {guard:.3} is not small, so the \
                             high-frequency limit behind the theoretical TFE sd does not apply",
                            s.epsilon, s.eta
                        ));
                    }
                }
            }
        }
        out
    }

    /// Cells in run order: scales outer, `n` inner.
    pub fn cells(&self) -> Vec<(Scale, usize)> {
        self.scales.iter().flat_map(|&s| self.n.iter().map(move |&n| (s, n))).collect()
    }
}
