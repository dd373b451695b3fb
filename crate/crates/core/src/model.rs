//! The slow-fast model class and the two built-in examples.
//!
//! ```text
//! dX = c_θ(X, Y) dt + √ε σ(Y) dW^H
//! dY = f(Y)/η dt + τ(Y)/√η dB
//! ```
//!
//! Matrices are passed as row-major slices to keep the simulator's inner loop
//! allocation free.

use crate::error::{Error, Result};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // unused when a dependency links std
use num_traits::Float;

/// Axis-aligned parameter box `Θ = Π [lowerᵢ, upperᵢ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParamBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        if lower.is_empty() {
            return Err(Error::invalid("parameter box has no dimensions"));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::invalid(alloc::format!("invalid parameter interval [{l}, {u}]")));
            }
        }
        Ok(ParamBox { lower, upper })
    }

    /// One-dimensional box `[lower, upper]`.
    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower], vec![upper])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Membership in the closed box.
    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta.iter().zip(self.lower.iter().zip(&self.upper)).all(|(t, (l, u))| l <= t && t <= u)
    }

    pub fn project(&self, theta: &mut [f64]) {
        for (t, (l, u)) in theta.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *t = t.clamp(*l, *u);
        }
    }

    /// Maps a point of the unit cube affinely onto the box.
    pub fn from_unit(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(s, (l, u))| l + s * (u - l))
            .collect()
    }

    pub fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: theta.len() });
        }
        if !self.contains(theta) {
            return Err(Error::invalid(alloc::format!("theta {theta:?} lies outside the parameter box")));
        }
        Ok(())
    }
}

/// Coefficients of a slow-fast system.
///
/// Implementations must be safe to evaluate concurrently.
pub trait SlowFastModel: Sync {
    fn name(&self) -> &str;

    /// `m`, the slow dimension.
    fn slow_dim(&self) -> usize;

    /// `d − m`, the fast dimension.
    fn fast_dim(&self) -> usize;

    /// `m̃`, the number of independent fBm components.
    fn noise_dim(&self) -> usize;

    fn param_box(&self) -> &ParamBox;

    fn initial_slow(&self) -> &[f64];

    fn initial_fast(&self) -> &[f64];

    /// Whether the fast state lives on the circle `ℝ / 2πℤ`.
    fn fast_on_circle(&self) -> bool {
        false
    }

    /// `c_θ(x, y)` into `out` (length `m`).
    fn drift(&self, theta: &[f64], x: &[f64], y: &[f64], out: &mut [f64]);

    /// `σ(y)` into `out`, row-major `m × m̃`.
    fn diffusion(&self, y: &[f64], out: &mut [f64]);

    /// `f(y)` into `out` (length `d − m`).
    fn fast_drift(&self, y: &[f64], out: &mut [f64]);

    /// `τ(y)` into `out`, row-major `(d − m) × (d − m)`.
    fn fast_diffusion(&self, y: &[f64], out: &mut [f64]);
}

/// Evaluates every coefficient at the initial condition and checks that the
/// results are finite.
pub fn validate_model<M: SlowFastModel + ?Sized>(model: &M, theta: &[f64]) -> Result<()> {
    let (m, k, q) = (model.slow_dim(), model.fast_dim(), model.noise_dim());
    if m == 0 || q == 0 {
        return Err(Error::invalid("slow and noise dimensions must be positive"));
    }
    model.param_box().check(theta)?;
    let x0 = model.initial_slow();
    let y0 = model.initial_fast();
    if x0.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: x0.len() });
    }
    if y0.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: y0.len() });
    }
    let mut c = vec![0.0; m];
    let mut s = vec![0.0; m * q];
    let mut f = vec![0.0; k];
    let mut t = vec![0.0; k * k];
    model.drift(theta, x0, y0, &mut c);
    model.diffusion(y0, &mut s);
    model.fast_drift(y0, &mut f);
    model.fast_diffusion(y0, &mut t);
    let finite = |v: &[f64]| v.iter().all(|z| z.is_finite());
    if !(finite(&c) && finite(&s) && finite(&f) && finite(&t) && finite(x0) && finite(y0)) {
        return Err(Error::invalid(alloc::format!(
            "model '{}' has non-finite coefficients at the initial condition",
            model.name()
        )));
    }
    Ok(())
}

fn default_box() -> ParamBox {
    ParamBox::interval(0.1, 3.0).expect("static bounds")
}

/// `dX = θ X Y² dt + √ε dW^H`, `dY = −Y/η dt + dB/√η`, started at `(1, 0)`.
#[derive(Debug, Clone)]
pub struct ConstantSigmaModel {
    param_box: ParamBox,
    x0: [f64; 1],
    y0: [f64; 1],
}

impl Default for ConstantSigmaModel {
    fn default() -> Self {
        Self::new()
    }
}

impl ConstantSigmaModel {
    pub fn new() -> Self {
        ConstantSigmaModel { param_box: default_box(), x0: [1.0], y0: [0.0] }
    }

    pub fn with_param_box(mut self, param_box: ParamBox) -> Result<Self> {
        if param_box.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: param_box.dim() });
        }
        self.param_box = param_box;
        Ok(self)
    }
}

impl SlowFastModel for ConstantSigmaModel {
    fn name(&self) -> &str {
        "constant-sigma"
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
        &self.x0
    }
    fn initial_fast(&self) -> &[f64] {
        &self.y0
    }
    #[inline]
    fn drift(&self, theta: &[f64], x: &[f64], y: &[f64], out: &mut [f64]) {
        out[0] = theta[0] * x[0] * y[0] * y[0];
    }
    #[inline]
    fn diffusion(&self, _y: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
    }
    #[inline]
    fn fast_drift(&self, y: &[f64], out: &mut [f64]) {
        out[0] = -y[0];
    }
    #[inline]
    fn fast_diffusion(&self, _y: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
    }
}

/// `dX = ½θX dt + √ε (L/2π) e^{sin Y + cos Y} dW^H`,
/// `dY = ½(sin Y − cos Y)/η dt + dB/√η` on the circle, started at `(1, 0)`.
#[derive(Debug, Clone)]
pub struct VariableSigmaModel {
    param_box: ParamBox,
    x0: [f64; 1],
    y0: [f64; 1],
    scale: f64,
}

impl Default for VariableSigmaModel {
    fn default() -> Self {
        Self::new()
    }
}

impl VariableSigmaModel {
    pub fn new() -> Self {
        let l = circle_normalizer();
        VariableSigmaModel { param_box: default_box(), x0: [1.0], y0: [0.0], scale: l / (2.0 * PI) }
    }

    pub fn with_param_box(mut self, param_box: ParamBox) -> Result<Self> {
        if param_box.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: param_box.dim() });
        }
        self.param_box = param_box;
        Ok(self)
    }

    /// `L = ∫₀^{2π} e^{−(sin y + cos y)} dy`.
    pub fn normalizer(&self) -> f64 {
        self.scale * 2.0 * PI
    }
}

/// Periodic trapezoid rule; spectrally accurate for the analytic integrand.
fn circle_normalizer() -> f64 {
    const NODES: usize = 256;
    let h = 2.0 * PI / NODES as f64;
    (0..NODES).map(|i| {
        let y = i as f64 * h;
        (-(y.sin() + y.cos())).exp()
    }).sum::<f64>()
        * h
}

impl SlowFastModel for VariableSigmaModel {
    fn name(&self) -> &str {
        "variable-sigma"
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
        &self.x0
    }
    fn initial_fast(&self) -> &[f64] {
        &self.y0
    }
    fn fast_on_circle(&self) -> bool {
        true
    }
    #[inline]
    fn drift(&self, theta: &[f64], x: &[f64], _y: &[f64], out: &mut [f64]) {
        out[0] = 0.5 * theta[0] * x[0];
    }
    #[inline]
    fn diffusion(&self, y: &[f64], out: &mut [f64]) {
        out[0] = self.scale * (y[0].sin() + y[0].cos()).exp();
    }
    #[inline]
    fn fast_drift(&self, y: &[f64], out: &mut [f64]) {
        out[0] = 0.5 * (y[0].sin() - y[0].cos());
    }
    #[inline]
    fn fast_diffusion(&self, _y: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
    }
}
