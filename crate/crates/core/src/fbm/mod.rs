//! Fractional Brownian motion: covariance, exact path synthesis and the
//! analytic constants behind the Hurst-estimator limit theorems.

mod constants;
mod synthesis;

pub use constants::{
    rho, rho_tilde, sigma1_sq, sigma2_sq, sigma_factor, sigma_star_sq, sigma_star_star_sq,
    theoretical_sd_h1, theoretical_sd_h2, AutocovarianceTable,
};
pub use synthesis::{fgn_autocovariance, sample_fbm, FbmPath, FbmSynthesizer, SynthesisMethod};

use crate::error::{Error, Result};
#[allow(unused_imports)] // unused when a dependency links std
use num_traits::Float;

/// Hurst index of a fractional Brownian motion.
///
/// Path synthesis accepts any value in `(0, 1)`. The estimator limit theory
/// needs `1/2 < H < 1`; values outside that range are flagged by
/// [`HurstIndex::in_estimator_range`], not rejected.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct HurstIndex(f64);

impl HurstIndex {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(HurstIndex(value))
        } else {
            Err(Error::invalid(alloc::format!(
                "Hurst index must lie in (0, 1), got {value}"
            )))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Whether the estimator theory applies (`1/2 < H < 1`).
    pub fn in_estimator_range(self) -> bool {
        self.0 > 0.5 && self.0 < 1.0
    }
}

/// `|x|^{2H}` with the removable point `0^{2H} := 0`.
#[inline]
pub(crate) fn abs_pow_2h(x: f64, hurst: f64) -> f64 {
    let a = x.abs();
    if a == 0.0 {
        0.0
    } else {
        (2.0 * hurst * a.ln()).exp()
    }
}

/// `R_H(s, t) = E[W^H_s W^H_t] = ½(s^{2H} + t^{2H} − |t−s|^{2H})`.
pub fn fbm_covariance(s: f64, t: f64, hurst: HurstIndex) -> Result<f64> {
    if s < 0.0 {
        return Err(Error::NegativeTime(s));
    }
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let h = hurst.value();
    Ok(0.5 * (abs_pow_2h(s, h) + abs_pow_2h(t, h) - abs_pow_2h(t - s, h)))
}
