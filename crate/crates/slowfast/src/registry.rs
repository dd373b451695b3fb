//! Built-in models addressable by name.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use slowfast_core::averaging::{AveragedSystem, HalfLinearAverage};
use slowfast_core::{ConstantSigmaModel, ParamBox, SlowFastModel, VariableSigmaModel};

/// `dX = √ε dW^H` with an idle Ornstein–Uhlenbeck fast component, so the
/// slow path is exactly `1 + √ε W^H` on the fine grid. Used for pure-fBm
/// Hurst studies; it has no identifiable drift parameter.
#[derive(Debug, Clone)]
pub struct PureFbmModel {
    param_box: ParamBox,
}

impl Default for PureFbmModel {
    fn default() -> Self {
        PureFbmModel { param_box: ParamBox::interval(0.1, 3.0).expect("static bounds") }
    }
}

impl SlowFastModel for PureFbmModel {
    fn name(&self) -> &str {
        "fbm"
    }
    fn slow_dim(&self) -> usize {
        1
    }
    fn fast_dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn param_box(&self) -> &ParamBox {
        &self.param_box
    }
    fn initial_slow(&self) -> &[f64] {
        &[1.0]
    }
    fn initial_fast(&self) -> &[f64] {
        &[0.0]
    }
    fn drift(&self, _: &[f64], _: &[f64], _: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn diffusion(&self, _: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
    }
    fn fast_drift(&self, y: &[f64], out: &mut [f64]) {
        out[0] = -y[0];
    }
    fn fast_diffusion(&self, _: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Constant(ConstantSigmaModel),
    Variable(VariableSigmaModel),
    Fbm(PureFbmModel),
}

/// A named model with its averaged system, when one exists.
#[derive(Debug, Clone)]
pub struct BuiltinModel {
    kind: Kind,
    averaged: Option<HalfLinearAverage>,
    sigma_bar: DMatrix<f64>,
}

pub const MODEL_NAMES: [&str; 3] = ["constant", "variable", "fbm"];

impl BuiltinModel {
    /// Accepts `constant` / `constant-sigma`, `variable` / `variable-sigma` and `fbm`.
    pub fn by_name(name: &str, param_box: Option<ParamBox>) -> Result<Self> {
        let kind = match name {
            "constant" | "constant-sigma" => {
                let m = ConstantSigmaModel::new();
                Kind::Constant(match param_box {
                    Some(b) => m.with_param_box(b)?,
                    None => m,
                })
            }
            "variable" | "variable-sigma" => {
                let m = VariableSigmaModel::new();
                Kind::Variable(match param_box {
                    Some(b) => m.with_param_box(b)?,
                    None => m,
                })
            }
            "fbm" => Kind::Fbm(PureFbmModel::default()),
            other => {
                return Err(Error::config(format!(
                    "unknown model '{other}', expected one of {}",
                    MODEL_NAMES.join(", ")
                )))
            }
        };
        let averaged = match &kind {
            Kind::Constant(m) => Some(m.averaged()),
            Kind::Variable(m) => Some(m.averaged()),
            Kind::Fbm(_) => None,
        };
        Ok(BuiltinModel { kind, averaged, sigma_bar: DMatrix::from_element(1, 1, 1.0) })
    }

    pub fn model(&self) -> &dyn SlowFastModel {
        match &self.kind {
            Kind::Constant(m) => m,
            Kind::Variable(m) => m,
            Kind::Fbm(m) => m,
        }
    }

    pub fn averaged(&self) -> Option<&dyn AveragedSystem> {
        self.averaged.as_ref().map(|a| a as &dyn AveragedSystem)
    }

    /// Like [`averaged`](Self::averaged) but an error for models without drift inference.
    pub fn require_averaged(&self) -> Result<&dyn AveragedSystem> {
        self.averaged().ok_or_else(|| {
            Error::config(format!("model '{}' has no identifiable drift; use h1 or h2 only", self.model().name()))
        })
    }

    /// `σ̄`; equal to 1 for every built-in model.
    pub fn sigma_bar(&self) -> &DMatrix<f64> {
        &self.sigma_bar
    }

    pub fn param_box(&self) -> &ParamBox {
        self.model().param_box()
    }
}
