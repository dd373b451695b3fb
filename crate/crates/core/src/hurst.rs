//! Hurst-index estimators built on second-order filtered quadratic variations.

use crate::error::{Error, Result};
use crate::fbm::{theoretical_sd_h1, theoretical_sd_h2, HurstIndex};
use crate::sim::ObservationSeries;
use alloc::vec::Vec;
use core::f64::consts::LN_2;
use nalgebra::DMatrix;
#[allow(unused_imports)] // unused when a dependency links std
use num_traits::Float;

const BISECTION_TOLERANCE: f64 = 1e-14;

/// `Δ²_{n,k} z = z_{t_k} − 2 z_{t_{k−1}} + z_{t_{k−2}}` for `k = 2..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredSeries {
    pub n: usize,
    pub horizon: f64,
    pub dim: usize,
    /// Row-major `(n − 1) × dim`.
    pub values: Vec<f64>,
}

impl FilteredSeries {
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// `Σ_k |Δ²_{n,k}|²`.
    pub fn sum_of_squares(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

pub fn second_order_filter(obs: &ObservationSeries) -> Result<FilteredSeries> {
    let n = obs.n();
    if n < 2 {
        return Err(Error::invalid(alloc::format!("second-order filter needs n >= 2, got {n}")));
    }
    let dim = obs.dim();
    let mut values = Vec::with_capacity((n - 1) * dim);
    for k in 2..=n {
        let (a, b, c) = (obs.at(k), obs.at(k - 1), obs.at(k - 2));
        for d in 0..dim {
            values.push(a[d] - 2.0 * b[d] + c[d]);
        }
    }
    Ok(FilteredSeries { n, horizon: obs.horizon(), dim, values })
}

fn check_n(n: usize, horizon: f64) -> Result<()> {
    if (n as f64) <= horizon {
        Err(Error::SampleCountTooSmall { n, horizon })
    } else {
        Ok(())
    }
}

/// `φ_{n,T}(x) = (T/n)^{2x} (4 − 2^{2x})`, strictly decreasing from 3 to 0 on `[0, 1]`.
pub fn phi(n: usize, horizon: f64, x: f64) -> Result<f64> {
    check_n(n, horizon)?;
    Ok(phi_unchecked(n, horizon, x))
}

fn phi_unchecked(n: usize, horizon: f64, x: f64) -> f64 {
    (2.0 * x * (horizon / n as f64).ln()).exp() * (4.0 - (2.0 * x * LN_2).exp())
}

/// Left inverse of [`phi`]: the root on `[0, 1]` for `v ∈ [0, 3]`, zero for `v ≥ 3`.
pub fn phi_inverse(n: usize, horizon: f64, v: f64) -> Result<f64> {
    check_n(n, horizon)?;
    if v.is_nan() || v < 0.0 {
        return Err(Error::invalid(alloc::format!("phi_inverse needs v >= 0, got {v}")));
    }
    if v >= 3.0 {
        return Ok(0.0);
    }
    if v == 0.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > BISECTION_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if phi_unchecked(n, horizon, mid) > v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HurstMethod {
    /// Needs `ε` and `σ̄`; inverts `φ_{n,T}`.
    H1,
    /// Scale free; compares two sampling frequencies.
    H2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurstEstimate {
    pub point: f64,
    pub method: HurstMethod,
    /// Plug-in asymptotic sd; `None` when the point estimate is outside `(0, 1)`.
    pub theoretical_sd: Option<f64>,
    /// Whether the point lies in `(1/2, 1)`.
    pub in_range: bool,
    /// `Ĥ₁` only: the statistic hit the flat part of `φ⁻¹` (≥ 3) or was zero.
    pub clamped: bool,
    /// The raw statistic before inversion (Ĥ₁) or the variation ratio (Ĥ₂).
    pub statistic: f64,
}

fn frobenius_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

/// `Ĥ₁ = φ⁻¹_{n,T}((1/(n ε |σ̄|²)) Σ_{k=2}^n |Δ²_{n,k} x|²)`.
pub fn estimate_h1(obs: &ObservationSeries, epsilon: f64, sigma_bar: &DMatrix<f64>) -> Result<HurstEstimate> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(alloc::format!("epsilon must be positive, got {epsilon}")));
    }
    if sigma_bar.nrows() != obs.dim() {
        return Err(Error::DimensionMismatch { expected: obs.dim(), got: sigma_bar.nrows() });
    }
    let norm = frobenius_sq(sigma_bar);
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Degenerate("sigma_bar must be nonzero".into()));
    }
    let n = obs.n();
    let horizon = obs.horizon();
    check_n(n, horizon)?;
    let filtered = second_order_filter(obs)?;
    let statistic = filtered.sum_of_squares() / (n as f64 * epsilon * norm);
    if !statistic.is_finite() {
        return Err(Error::Degenerate("non-finite quadratic variation".into()));
    }
    let point = phi_inverse(n, horizon, statistic)?;
    let theoretical_sd = HurstIndex::new(point)
        .ok()
        .and_then(|h| theoretical_sd_h1(n, horizon, h, sigma_bar).ok());
    Ok(HurstEstimate {
        point,
        method: HurstMethod::H1,
        theoretical_sd,
        in_range: point > 0.5 && point < 1.0,
        clamped: statistic >= 3.0 || statistic == 0.0,
        statistic,
    })
}

/// `Ĥ₂ = 1/2 − ln(Σ|Δ²_{2n,k} x|² / Σ|Δ²_{n,k} x|²) / (2 ln 2)`, where the
/// denominator uses every second observation.
///
/// `obs` holds `2n + 1` points. `sigma_bar` only enters the theoretical sd;
/// with `None` it is taken as scalar, which is exact when `m = 1`.
pub fn estimate_h2(obs: &ObservationSeries, sigma_bar: Option<&DMatrix<f64>>) -> Result<HurstEstimate> {
    let samples = obs.n();
    if samples < 4 || samples % 2 != 0 {
        return Err(Error::invalid(alloc::format!(
            "second Hurst estimator needs an even sample count >= 4, got {samples}"
        )));
    }
    let fine = second_order_filter(obs)?.sum_of_squares();
    let coarse = second_order_filter(&obs.subsample(samples / 2)?)?.sum_of_squares();
    if !(coarse > 0.0) || !coarse.is_finite() || !fine.is_finite() {
        return Err(Error::Degenerate("coarse quadratic variation is zero".into()));
    }
    let ratio = fine / coarse;
    let point = h2_from_ratio(ratio);
    let scalar = DMatrix::from_element(1, 1, 1.0);
    let sd_matrix = match sigma_bar {
        Some(s) => Some(s),
        None if obs.dim() == 1 => Some(&scalar),
        None => None,
    };
    let theoretical_sd = match (HurstIndex::new(point), sd_matrix) {
        (Ok(h), Some(s)) => theoretical_sd_h2(samples, h, s).ok(),
        _ => None,
    };
    Ok(HurstEstimate {
        point,
        method: HurstMethod::H2,
        theoretical_sd,
        in_range: point > 0.5 && point < 1.0,
        clamped: false,
        statistic: ratio,
    })
}

/// `1/2 − ln(ratio) / (2 ln 2)`.
pub fn h2_from_ratio(ratio: f64) -> f64 {
    0.5 - ratio.ln() / (2.0 * LN_2)
}

/// `n^{2H−1} / (T^{2H}(4 − 2^{2H}) |σ̄|²) · Σ_k |Δ²_{n,k} x|²`, which tends to 1
/// when `x = σ̄ W^H`.
pub fn normalized_qv(obs: &ObservationSeries, sigma_bar: &DMatrix<f64>, hurst: HurstIndex) -> Result<f64> {
    if sigma_bar.nrows() != obs.dim() {
        return Err(Error::DimensionMismatch { expected: obs.dim(), got: sigma_bar.nrows() });
    }
    let norm = frobenius_sq(sigma_bar);
    if !(norm > 0.0) {
        return Err(Error::Degenerate("sigma_bar must be nonzero".into()));
    }
    let h = hurst.value();
    let n = obs.n() as f64;
    let horizon = obs.horizon();
    let filtered = second_order_filter(obs)?;
    let scale = ((2.0 * h - 1.0) * n.ln() - 2.0 * h * horizon.ln()).exp()
        / ((4.0 - (2.0 * h * LN_2).exp()) * norm);
    Ok(scale * filtered.sum_of_squares())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn series(values: Vec<f64>) -> ObservationSeries {
        ObservationSeries::scalar(1.0, values).unwrap()
    }

    #[test]
    fn filter_kills_affine_and_scales_quadratic() {
        let n = 20;
        let lin = series((0..=n).map(|k| 3.0 - 2.0 * k as f64 / n as f64).collect());
        assert!(second_order_filter(&lin).unwrap().values.iter().all(|v| v.abs() < 1e-14));
        let quad = series((0..=n).map(|k| (k as f64 / n as f64).powi(2)).collect());
        let f = second_order_filter(&quad).unwrap();
        assert_eq!(f.len(), n - 1);
        for v in &f.values {
            assert!((v - 2.0 / (n * n) as f64).abs() < 1e-15);
        }
        let tiny = series(vec![0.0, 1.0, 0.0]);
        assert_eq!(second_order_filter(&tiny).unwrap().values, vec![-2.0]);
        assert!(second_order_filter(&series(vec![0.0, 1.0])).is_err());
    }

    #[test]
    fn phi_endpoints_and_inverse() {
        assert!((phi(100, 1.0, 0.0).unwrap() - 3.0).abs() < 1e-15);
        assert!(phi(100, 1.0, 1.0).unwrap().abs() < 1e-15);
        assert!((phi(100, 1.0, 0.5).unwrap() - 0.02).abs() < 1e-15);
        assert!((phi_inverse(100, 1.0, 0.02).unwrap() - 0.5).abs() < 1e-13);
        assert_eq!(phi_inverse(100, 1.0, 3.7).unwrap(), 0.0);
        assert!(phi(1, 1.0, 0.5).is_err());
        assert!(phi_inverse(2, 3.0, 0.5).is_err());
    }

    #[test]
    fn phi_inverse_roundtrip() {
        for n in [10usize, 1000, 1_000_000] {
            for i in 0..=50 {
                let x = i as f64 / 50.0;
                let v = phi(n, 2.0, x).unwrap();
                let back = phi_inverse(n, 2.0, v).unwrap();
                assert!((back - x).abs() < 1e-10, "n={n} x={x} back={back}");
            }
        }
    }

    #[test]
    fn h2_on_exact_ratios() {
        // Second differences alternate so that the ratio is controlled.
        let flat = series((0..=8).map(|k| if k % 2 == 0 { 0.0 } else { 1.0 }).collect());
        let est = estimate_h2(&flat, None);
        // Every other point is constant: coarse variation vanishes.
        assert!(est.is_err());
        let fine_sum_equal = series(vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        // fine: Δ² = (1, −2, 1) → 6; coarse (0, 1, 0): Δ² = −2 → 4.
        let e = estimate_h2(&fine_sum_equal, None).unwrap();
        assert!((e.statistic - 1.5).abs() < 1e-15);
        assert!((e.point - (0.5 - 1.5f64.ln() / (2.0 * LN_2))).abs() < 1e-15);
        assert!(estimate_h2(&series(vec![0.0; 6]), None).is_err());
        assert!(estimate_h2(&series(vec![0.0, 1.0, 3.0, 2.0]), None).is_err());
    }

    #[test]
    fn h2_ratio_map() {
        assert_eq!(h2_from_ratio(1.0), 0.5);
        assert!((h2_from_ratio(0.25) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn h1_recovers_half_from_exact_statistic() {
        // Alternating increments give Δ² = ±2a, so the statistic is known exactly.
        let n = 100;
        let target = 2.0 / n as f64; // φ(1/2)
        // statistic = (n−1)·4a²/n = target
        let a = (target * n as f64 / (4.0 * (n - 1) as f64)).sqrt();
        let values: Vec<f64> = (0..=n).map(|k| if k % 2 == 0 { 0.0 } else { a }).collect();
        let est = estimate_h1(&series(values), 1.0, &DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert!((est.point - 0.5).abs() < 1e-12);
        assert!(!est.clamped);
    }
}
