//! Drift estimation: the trajectory-fitting estimator (TFE), the
//! minimum-contrast estimator (MCE) and their asymptotic covariances.

mod mce;
mod optimize;
mod tfe;
mod variance;

pub use mce::{
    build_xi, estimate_mce, mce_contrast, LocalXiStore, MceOptions, XiConfig, XiFactor, XiKey, XiMatrix, XiStore,
};
pub use optimize::{
    halton_starts, minimize_in_box, numeric_gradient, Minimum, OptimizerConfig, OptimizerDiagnostics, StartReport,
    StartStatus,
};
pub use tfe::{estimate_tfe, tfe_contrast, TfeOptions};
pub use variance::{
    mce_variance, tfe_variance, tfe_variance_limit, variance_comparison, VarianceComparison, PSD_FLOOR,
};

use crate::averaging::AveragedSystem;
use crate::error::{Error, Result};
use crate::sim::ObservationSeries;
use alloc::vec::Vec;
use core::fmt;
use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DriftMethod {
    Tfe,
    Mce,
}

impl fmt::Display for DriftMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DriftMethod::Tfe => "tfe",
            DriftMethod::Mce => "mce",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastEvaluation {
    pub theta: Vec<f64>,
    pub value: f64,
    pub gradient: Option<Vec<f64>>,
}

/// Limit covariance `M` of `(θ̂ − θ)/√ε` together with `εM`, the
/// finite-`ε` approximation of `Var(θ̂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticCovariance {
    pub epsilon: f64,
    pub limit: DMatrix<f64>,
    pub scaled: DMatrix<f64>,
}

impl AsymptoticCovariance {
    pub fn new(limit: DMatrix<f64>, epsilon: f64) -> Self {
        let scaled = &limit * epsilon;
        AsymptoticCovariance { epsilon, limit, scaled }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftEstimate {
    pub point: Vec<f64>,
    pub method: DriftMethod,
    pub contrast: f64,
    pub covariance: Option<AsymptoticCovariance>,
    pub diagnostics: OptimizerDiagnostics,
}

/// Observation-side checks shared by both contrasts.
fn check_observations(avg: &dyn AveragedSystem, obs: &ObservationSeries) -> Result<()> {
    if obs.dim() != avg.dim() {
        return Err(Error::DimensionMismatch { expected: avg.dim(), got: obs.dim() });
    }
    Ok(())
}
