//! Autocorrelations of filtered fBm increments and the CLT variances of the
//! Hurst estimators.

use super::{abs_pow_2h, HurstIndex};
use crate::error::{Error, Result};
use alloc::vec::Vec;
use core::f64::consts::LN_2;
use nalgebra::DMatrix;
#[allow(unused_imports)] // unused when a dependency links std
use num_traits::Float;

/// Beyond this lag the finite-difference formulas lose too many digits to
/// cancellation and the binomial expansion takes over.
pub(super) const ASYMPTOTIC_LAG: f64 = 64.0;
const INITIAL_TRUNCATION: usize = 10_000;
const BLOCK_TOLERANCE: f64 = 1e-12;
const MAX_TRUNCATION: usize = 1 << 26;

fn ln_denominator(hurst: f64) -> f64 {
    2.0 * (4.0 - (2.0 * hurst * LN_2).exp())
}

/// Σ_{i≥first} binom(2H, 2i) c_{2i} j^{-2i} · j^{2H}, the even-order expansion
/// of a symmetric finite-difference stencil applied to |x|^{2H} at x = j.
pub(super) fn stencil_expansion(j: f64, hurst: f64, first: i32, coefficient: impl Fn(i32) -> f64) -> f64 {
    let a = 2.0 * hurst;
    let inv2 = 1.0 / (j * j);
    let mut binom = 1.0;
    for k in 0..2 * first {
        binom *= (a - k as f64) / (k + 1) as f64;
    }
    let mut power = inv2.powi(first);
    let mut sum = 0.0;
    let mut i = first;
    loop {
        let term = binom * coefficient(i) * power;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() || i > 60 {
            break;
        }
        let k = 2 * i;
        binom *= (a - k as f64) / (k + 1) as f64;
        binom *= (a - (k + 1) as f64) / (k + 2) as f64;
        power *= inv2;
        i += 1;
    }
    sum * abs_pow_2h(j, hurst)
}

/// Autocorrelation of second-order filtered fBm increments at lag `j`:
/// `(−|j−2|^{2H} + 4|j−1|^{2H} − 6|j|^{2H} + 4|j+1|^{2H} − |j+2|^{2H}) / (2(4 − 2^{2H}))`.
pub fn rho(j: i64, hurst: HurstIndex) -> f64 {
    let h = hurst.value();
    let jf = (j as f64).abs();
    let numerator = if jf >= ASYMPTOTIC_LAG {
        // Stencil weights (1, −4, 6, −4, 1) negated; Σ w_s s^{2i} = 2·4^i − 8.
        -stencil_expansion(jf, h, 2, |i| 2.0 * 4f64.powi(i) - 8.0)
    } else {
        -abs_pow_2h(jf - 2.0, h) + 4.0 * abs_pow_2h(jf - 1.0, h) - 6.0 * abs_pow_2h(jf, h)
            + 4.0 * abs_pow_2h(jf + 1.0, h)
            - abs_pow_2h(jf + 2.0, h)
    };
    numerator / ln_denominator(h)
}

/// Cross-scale correlation between second differences at spacing `1` and `2`:
/// the seven-term stencil `(−1, 2, 1, −4, 1, 2, −1)` over `2(4 − 2^{2H})2^H`.
pub fn rho_tilde(j: i64, hurst: HurstIndex) -> f64 {
    let h = hurst.value();
    let jf = (j as f64).abs();
    let numerator = if jf >= ASYMPTOTIC_LAG {
        // Σ w_s s^{2i} = 2(−9^i + 2·4^i + 1).
        stencil_expansion(jf, h, 2, |i| 2.0 * (-(9f64.powi(i)) + 2.0 * 4f64.powi(i) + 1.0))
    } else {
        -abs_pow_2h(jf - 3.0, h) + 2.0 * abs_pow_2h(jf - 2.0, h) + abs_pow_2h(jf - 1.0, h)
            - 4.0 * abs_pow_2h(jf, h)
            + abs_pow_2h(jf + 1.0, h)
            + 2.0 * abs_pow_2h(jf + 2.0, h)
            - abs_pow_2h(jf + 3.0, h)
    };
    numerator / (ln_denominator(h) * (h * LN_2).exp())
}

/// `Σ_{j=from}^{to} f(j)²`, accumulated from the tail so the small terms are
/// added first.
fn squared_block(from: usize, to: usize, f: &impl Fn(i64) -> f64) -> f64 {
    (from..=to).rev().map(|j| {
        let v = f(j as i64);
        v * v
    }).sum()
}

/// `Σ_{j≥1} f(j)²` with adaptive truncation: the truncation `J` starts at
/// 10⁴ and doubles until the newest block contributes less than 10⁻¹².
fn one_sided_square_sum(f: impl Fn(i64) -> f64) -> f64 {
    let mut truncation = INITIAL_TRUNCATION;
    let mut head = squared_block(1, truncation, &f);
    loop {
        let block = squared_block(truncation + 1, 2 * truncation, &f);
        truncation *= 2;
        if block < BLOCK_TOLERANCE || truncation >= MAX_TRUNCATION {
            // Combine small-to-large.
            return block + head;
        }
        head += block;
    }
}

/// `ς₁²(H) = 2 Σ_{j∈ℤ} ρ²(j; H)`.
pub fn sigma1_sq(hurst: HurstIndex) -> f64 {
    let tail = one_sided_square_sum(|j| rho(j, hurst));
    2.0 * (2.0 * tail + 1.0)
}

/// `ς₂²(H) = Σ_{j∈ℤ} ρ̃²(j; H)`.
pub fn sigma2_sq(hurst: HurstIndex) -> f64 {
    let tail = one_sided_square_sum(|j| rho_tilde(j, hurst));
    let centre = rho_tilde(0, hurst);
    2.0 * tail + centre * centre
}

/// `(1/|σ̄|⁴) Σ σ̄_{ij} σ̄_{iq} σ̄_{kj} σ̄_{kq} = |σ̄ᵀσ̄|² / |σ̄|⁴` (Frobenius norms).
pub fn sigma_factor(sigma_bar: &DMatrix<f64>) -> Result<f64> {
    let norm_sq = sigma_bar.norm_squared();
    if norm_sq == 0.0 || !norm_sq.is_finite() {
        return Err(Error::Degenerate("σ̄ must be a nonzero finite matrix".into()));
    }
    let gram = sigma_bar.transpose() * sigma_bar;
    Ok(gram.norm_squared() / (norm_sq * norm_sq))
}

/// `ς⋆²(H) = ς₁²(H) · sigma_factor(σ̄)`.
pub fn sigma_star_sq(hurst: HurstIndex, sigma_bar: &DMatrix<f64>) -> Result<f64> {
    Ok(sigma1_sq(hurst) * sigma_factor(sigma_bar)?)
}

/// `ς⋆⋆²(H) = (3/2 ς₁²(H) − 2 ς₂²(H)) · sigma_factor(σ̄)`.
pub fn sigma_star_star_sq(hurst: HurstIndex, sigma_bar: &DMatrix<f64>) -> Result<f64> {
    let factor = sigma_factor(sigma_bar)?;
    let value = (1.5 * sigma1_sq(hurst) - 2.0 * sigma2_sq(hurst)) * factor;
    if value < 0.0 {
        return Err(Error::InternalConsistency(alloc::format!(
            "ς⋆⋆² = {value:e} is negative at H = {}",
            hurst.value()
        )));
    }
    Ok(value)
}

/// Asymptotic standard deviation of Ĥ₁ from `n` observations on `[0, T]`:
/// `√ς⋆² / (2√n ln(n/T))`.
pub fn theoretical_sd_h1(n: usize, horizon: f64, hurst: HurstIndex, sigma_bar: &DMatrix<f64>) -> Result<f64> {
    let nf = n as f64;
    if !(nf > horizon) {
        return Err(Error::SampleCountTooSmall { n, horizon });
    }
    Ok(sigma_star_sq(hurst, sigma_bar)?.sqrt() / (2.0 * nf.sqrt() * (nf / horizon).ln()))
}

/// Asymptotic standard deviation of Ĥ₂ given the **total** sample count
/// `samples = 2n`: `√ς⋆⋆² / (2 ln 2 √n)` with `n = samples / 2`, the number of
/// coarse-scale increments.
pub fn theoretical_sd_h2(samples: usize, hurst: HurstIndex, sigma_bar: &DMatrix<f64>) -> Result<f64> {
    if samples < 4 || samples % 2 != 0 {
        return Err(Error::invalid(alloc::format!(
            "Ĥ₂ needs an even sample count of at least 4, got {samples}"
        )));
    }
    let coarse = samples as f64 / 2.0;
    Ok(sigma_star_star_sq(hurst, sigma_bar)?.sqrt() / (2.0 * LN_2 * coarse.sqrt()))
}

/// ρ and ρ̃ tabulated for lags `0..=J`; lookups are symmetric in the lag.
#[derive(Debug, Clone)]
pub struct AutocovarianceTable {
    hurst: HurstIndex,
    rho: Vec<f64>,
    rho_tilde: Vec<f64>,
}

impl AutocovarianceTable {
    pub fn new(hurst: HurstIndex, truncation: usize) -> Self {
        let rho_values = (0..=truncation as i64).map(|j| rho(j, hurst)).collect();
        let rho_tilde_values = (0..=truncation as i64).map(|j| rho_tilde(j, hurst)).collect();
        AutocovarianceTable { hurst, rho: rho_values, rho_tilde: rho_tilde_values }
    }

    pub fn hurst(&self) -> HurstIndex {
        self.hurst
    }

    pub fn truncation(&self) -> usize {
        self.rho.len() - 1
    }

    pub fn rho(&self, j: i64) -> Option<f64> {
        self.rho.get(j.unsigned_abs() as usize).copied()
    }

    pub fn rho_tilde(&self, j: i64) -> Option<f64> {
        self.rho_tilde.get(j.unsigned_abs() as usize).copied()
    }
}
