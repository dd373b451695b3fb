//! Exact fBm synthesis on a uniform grid.
//!
//! Fractional Gaussian noise (the increments) is generated by circulant
//! embedding of its autocovariance. When the embedding spectrum has an
//! eigenvalue below `-1e-10` the generator falls back to a dense Cholesky
//! factor of the Toeplitz covariance for `N ≤ 2¹³` and errors above that.

use super::constants::{stencil_expansion, ASYMPTOTIC_LAG};
use super::{abs_pow_2h, HurstIndex};
use crate::error::{Error, Result};
use crate::fft::fft_in_place;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
use num_complex::Complex64;
#[allow(unused_imports)] // unused when a dependency links std
use num_traits::Float;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const EIGENVALUE_TOLERANCE: f64 = -1e-10;
const DENSE_FALLBACK_LIMIT: usize = 1 << 13;

/// Autocovariance of unit-spacing fractional Gaussian noise,
/// `γ(k) = ½(|k+1|^{2H} − 2|k|^{2H} + |k−1|^{2H})`.
pub fn fgn_autocovariance(lag: usize, hurst: HurstIndex) -> f64 {
    let h = hurst.value();
    let k = lag as f64;
    if k >= ASYMPTOTIC_LAG {
        // The three-term difference cancels catastrophically at large lags.
        stencil_expansion(k, h, 1, |_| 1.0)
    } else {
        0.5 * (abs_pow_2h(k + 1.0, h) - 2.0 * abs_pow_2h(k, h) + abs_pow_2h(k - 1.0, h))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthesisMethod {
    CirculantEmbedding,
    DenseCholesky,
}

#[derive(Debug, Clone)]
enum Factor {
    /// `√(λ_k / 2M)` for the length-`2M` embedding.
    Spectral(Vec<f64>),
    /// Lower Cholesky factor of the `N × N` increment covariance.
    Dense(DMatrix<f64>),
}

/// Precomputed factorization of the increment covariance for a fixed
/// `(N, T, H)`. Reusable across paths and safe to share between threads.
#[derive(Debug, Clone)]
pub struct FbmSynthesizer {
    steps: usize,
    horizon: f64,
    hurst: HurstIndex,
    scale: f64,
    factor: Factor,
}

impl FbmSynthesizer {
    pub fn new(steps: usize, horizon: f64, hurst: HurstIndex) -> Result<Self> {
        let scale = grid_scale(steps, horizon, hurst)?;
        let factor = match circulant_spectrum(steps, hurst) {
            Ok(root) => Factor::Spectral(root),
            Err(min_eigenvalue) => {
                if steps > DENSE_FALLBACK_LIMIT {
                    return Err(Error::EmbeddingFailed { steps, min_eigenvalue });
                }
                let lower = dense_factor(steps, hurst).ok_or(Error::EmbeddingFailed { steps, min_eigenvalue })?;
                Factor::Dense(lower)
            }
        };
        Ok(FbmSynthesizer { steps, horizon, hurst, scale, factor })
    }

    /// Forces the dense Cholesky route regardless of the embedding spectrum.
    pub fn dense(steps: usize, horizon: f64, hurst: HurstIndex) -> Result<Self> {
        let scale = grid_scale(steps, horizon, hurst)?;
        let lower = dense_factor(steps, hurst).ok_or(Error::EmbeddingFailed { steps, min_eigenvalue: f64::NAN })?;
        Ok(FbmSynthesizer { steps, horizon, hurst, scale, factor: Factor::Dense(lower) })
    }

    pub fn method(&self) -> SynthesisMethod {
        match self.factor {
            Factor::Spectral(_) => SynthesisMethod::CirculantEmbedding,
            Factor::Dense(_) => SynthesisMethod::DenseCholesky,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn hurst(&self) -> HurstIndex {
        self.hurst
    }

    /// Fills `out` (length `N`) with fBm increments `W_{t_{i+1}} − W_{t_i}`.
    pub fn increments<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        assert_eq!(out.len(), self.steps, "increment buffer has the wrong length");
        match &self.factor {
            Factor::Spectral(root) => {
                let mut buf: Vec<Complex64> = root
                    .iter()
                    .map(|s| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(s * re, s * im)
                    })
                    .collect();
                fft_in_place(&mut buf);
                for (o, v) in out.iter_mut().zip(&buf) {
                    *o = v.re * self.scale;
                }
            }
            Factor::Dense(lower) => {
                let z: Vec<f64> = (0..self.steps).map(|_| rng.sample(StandardNormal)).collect();
                for (i, o) in out.iter_mut().enumerate() {
                    let row = lower.row(i);
                    let mut acc = 0.0;
                    for (j, zj) in z.iter().enumerate().take(i + 1) {
                        acc += row[j] * zj;
                    }
                    *o = acc * self.scale;
                }
            }
        }
    }

    /// Samples `components` independent paths. Each component draws from its
    /// own stream, sub-seeded from `rng`.
    pub fn sample<R: RngCore + ?Sized>(&self, components: usize, rng: &mut R) -> FbmPath {
        let mut values = Vec::with_capacity(components);
        let mut incr = vec![0.0; self.steps];
        for _ in 0..components {
            let mut stream = ChaCha8Rng::seed_from_u64(rng.next_u64());
            self.increments(&mut stream, &mut incr);
            let mut path = Vec::with_capacity(self.steps + 1);
            let mut acc = 0.0;
            path.push(0.0);
            for d in &incr {
                acc += d;
                path.push(acc);
            }
            values.push(path);
        }
        FbmPath { horizon: self.horizon, steps: self.steps, hurst: self.hurst, values }
    }
}

/// `(T/N)^H`, the self-similarity scaling from unit-spacing noise to the grid.
fn grid_scale(steps: usize, horizon: f64, hurst: HurstIndex) -> Result<f64> {
    if steps == 0 {
        return Err(Error::invalid("fBm synthesis needs at least one step"));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid(alloc::format!("horizon must be positive, got {horizon}")));
    }
    Ok((horizon / steps as f64).powf(hurst.value()))
}

/// Returns `√(λ_k/2M)` for the minimal power-of-two embedding `M ≥ N`, or the
/// most negative eigenvalue when it falls below tolerance.
fn circulant_spectrum(steps: usize, hurst: HurstIndex) -> core::result::Result<Vec<f64>, f64> {
    let half = steps.next_power_of_two();
    let size = 2 * half;
    let mut row = vec![Complex64::new(0.0, 0.0); size];
    for k in 0..=half {
        let g = fgn_autocovariance(k, hurst);
        row[k] = Complex64::new(g, 0.0);
        if k > 0 && k < half {
            row[size - k] = Complex64::new(g, 0.0);
        }
    }
    fft_in_place(&mut row);
    let min = row.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
    if min < EIGENVALUE_TOLERANCE {
        return Err(min);
    }
    let norm = size as f64;
    Ok(row.iter().map(|c| (c.re.max(0.0) / norm).sqrt()).collect())
}

fn dense_factor(steps: usize, hurst: HurstIndex) -> Option<DMatrix<f64>> {
    let gamma: Vec<f64> = (0..steps).map(|k| fgn_autocovariance(k, hurst)).collect();
    let cov = DMatrix::from_fn(steps, steps, |i, j| gamma[i.abs_diff(j)]);
    cov.cholesky().map(|c| c.l())
}

/// Sampled fBm on the uniform grid `t_i = iT/N`; `values[c][i]` is component
/// `c` at `t_i`, with `values[c][0] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    pub horizon: f64,
    pub steps: usize,
    pub hurst: HurstIndex,
    pub values: Vec<Vec<f64>>,
}

impl FbmPath {
    pub fn components(&self) -> usize {
        self.values.len()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.horizon * i as f64 / self.steps as f64
    }
}

/// One-shot synthesis of `components` independent fBm paths with `N` steps on `[0, T]`.
pub fn sample_fbm<R: RngCore + ?Sized>(
    steps: usize,
    horizon: f64,
    hurst: HurstIndex,
    components: usize,
    rng: &mut R,
) -> Result<FbmPath> {
    Ok(FbmSynthesizer::new(steps, horizon, hurst)?.sample(components, rng))
}
