//! Euler–Maruyama simulation on a fine grid and subsampling to observations.

use crate::error::{Error, Result};
use crate::fbm::{FbmSynthesizer, HurstIndex};
use crate::model::{validate_model, SlowFastModel};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;
#[allow(unused_imports)] // unused when a dependency links std
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Below `STIFFNESS_RATIO · Δt` the fast process is flagged as under-resolved.
pub const STIFFNESS_RATIO: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub epsilon: f64,
    pub eta: f64,
    pub horizon: f64,
    pub fine_steps: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("epsilon", self.epsilon), ("eta", self.eta), ("horizon", self.horizon)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(alloc::format!("{name} must be positive, got {v}")));
            }
        }
        if self.fine_steps == 0 {
            return Err(Error::invalid("fine_steps must be at least 1"));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.fine_steps as f64
    }

    /// True when `η < 10·Δt`, i.e. the explicit scheme barely resolves the fast scale.
    pub fn is_stiff(&self) -> bool {
        self.eta < STIFFNESS_RATIO * self.step()
    }
}

/// Slow and fast states on the fine grid, row-major by time.
#[derive(Debug, Clone, PartialEq)]
pub struct SimPath {
    pub horizon: f64,
    pub steps: usize,
    pub slow_dim: usize,
    pub fast_dim: usize,
    pub slow: Vec<f64>,
    pub fast: Vec<f64>,
    /// Set when the configuration tripped the stiffness threshold.
    pub stiff: bool,
}

impl SimPath {
    pub fn slow_at(&self, i: usize) -> &[f64] {
        &self.slow[i * self.slow_dim..(i + 1) * self.slow_dim]
    }

    pub fn fast_at(&self, i: usize) -> &[f64] {
        &self.fast[i * self.fast_dim..(i + 1) * self.fast_dim]
    }

    pub fn time(&self, i: usize) -> f64 {
        self.horizon * i as f64 / self.steps as f64
    }

    /// Slow component sampled at `t_k = Tk/n`, `k = 0..=n`.
    pub fn subsample(&self, n: usize) -> Result<ObservationSeries> {
        let stride = stride(self.steps, n)?;
        let m = self.slow_dim;
        let mut values = Vec::with_capacity((n + 1) * m);
        for k in 0..=n {
            values.extend_from_slice(self.slow_at(k * stride));
        }
        ObservationSeries::new(self.horizon, m, values)
    }
}

fn stride(fine: usize, n: usize) -> Result<usize> {
    if n == 0 || fine % n != 0 {
        return Err(Error::NotDivisible { fine, n });
    }
    Ok(fine / n)
}

/// Uniformly spaced observations `x_{t_k}`, `t_k = Tk/n`, `k = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    horizon: f64,
    dim: usize,
    values: Vec<f64>,
}

impl ObservationSeries {
    /// `values` is row-major `(n + 1) × dim`.
    pub fn new(horizon: f64, dim: usize, values: Vec<f64>) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(alloc::format!("horizon must be positive, got {horizon}")));
        }
        if dim == 0 || values.len() % dim != 0 || values.len() / dim < 2 {
            return Err(Error::invalid(alloc::format!(
                "need at least two observations of dimension {dim}, got {} values",
                values.len()
            )));
        }
        Ok(ObservationSeries { horizon, dim, values })
    }

    pub fn scalar(horizon: f64, values: Vec<f64>) -> Result<Self> {
        Self::new(horizon, 1, values)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Sample count `n`; there are `n + 1` rows including `t_0 = 0`.
    pub fn n(&self) -> usize {
        self.values.len() / self.dim - 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn time(&self, k: usize) -> f64 {
        self.horizon * k as f64 / self.n() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Every `n/n'`-th row.
    pub fn subsample(&self, n: usize) -> Result<ObservationSeries> {
        let stride = stride(self.n(), n)?;
        let mut values = Vec::with_capacity((n + 1) * self.dim);
        for k in 0..=n {
            values.extend_from_slice(self.at(k * stride));
        }
        ObservationSeries::new(self.horizon, self.dim, values)
    }

    /// Multiplies every value by `c`.
    pub fn scaled(&self, c: f64) -> ObservationSeries {
        ObservationSeries {
            horizon: self.horizon,
            dim: self.dim,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

/// Reusable simulator: the fBm factorization for `(N, T, H)` is built once.
#[derive(Debug)]
pub struct Simulator<'a, M: SlowFastModel + ?Sized> {
    model: &'a M,
    synth: FbmSynthesizer,
    epsilon: f64,
    eta: f64,
}

impl<'a, M: SlowFastModel + ?Sized> Simulator<'a, M> {
    pub fn new(model: &'a M, hurst: HurstIndex, cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let synth = FbmSynthesizer::new(cfg.fine_steps, cfg.horizon, hurst)?;
        Ok(Simulator { model, synth, epsilon: cfg.epsilon, eta: cfg.eta })
    }

    pub fn steps(&self) -> usize {
        self.synth.steps()
    }

    /// One trajectory. fBm component `j` draws from ChaCha stream `j`, the
    /// fast Brownian motion from stream `m̃`.
    pub fn run(&self, theta: &[f64], seed: u64) -> Result<SimPath> {
        let model = self.model;
        validate_model(model, theta)?;
        let (m, k, q) = (model.slow_dim(), model.fast_dim(), model.noise_dim());
        let steps = self.synth.steps();
        let horizon = self.synth.horizon();
        let dt = horizon / steps as f64;
        let sqrt_eps = self.epsilon.sqrt();
        let fast_scale = (dt / self.eta).sqrt();

        let mut noise = vec![0.0; q * steps];
        for (j, chunk) in noise.chunks_exact_mut(steps).enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            self.synth.increments(&mut rng, chunk);
        }
        let mut brownian = ChaCha8Rng::seed_from_u64(seed);
        brownian.set_stream(q as u64);

        let mut slow = Vec::with_capacity((steps + 1) * m);
        let mut fast = Vec::with_capacity((steps + 1) * k);
        slow.extend_from_slice(model.initial_slow());
        fast.extend_from_slice(model.initial_fast());
        let circle = model.fast_on_circle();

        let mut x = model.initial_slow().to_vec();
        let mut y = model.initial_fast().to_vec();
        let mut c = vec![0.0; m];
        let mut sigma = vec![0.0; m * q];
        let mut f = vec![0.0; k];
        let mut tau = vec![0.0; k * k];
        let mut db = vec![0.0; k];

        for i in 0..steps {
            model.drift(theta, &x, &y, &mut c);
            model.diffusion(&y, &mut sigma);
            model.fast_drift(&y, &mut f);
            model.fast_diffusion(&y, &mut tau);
            for a in 0..m {
                let mut dw = 0.0;
                for j in 0..q {
                    dw += sigma[a * q + j] * noise[j * steps + i];
                }
                x[a] += c[a] * dt + sqrt_eps * dw;
            }
            for z in db.iter_mut() {
                *z = brownian.sample::<f64, _>(StandardNormal);
            }
            for a in 0..k {
                let mut acc = 0.0;
                for b in 0..k {
                    acc += tau[a * k + b] * db[b];
                }
                y[a] += f[a] * dt / self.eta + fast_scale * acc;
                if circle {
                    y[a] = num_traits::Euclid::rem_euclid(&y[a], &TAU);
                }
            }
            if x.iter().chain(&y).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { step: i + 1 });
            }
            slow.extend_from_slice(&x);
            fast.extend_from_slice(&y);
        }

        Ok(SimPath {
            horizon,
            steps,
            slow_dim: m,
            fast_dim: k,
            slow,
            fast,
            stiff: self.eta < STIFFNESS_RATIO * dt,
        })
    }
}

/// One-shot simulation with the seed taken from `cfg`.
pub fn euler_maruyama<M: SlowFastModel + ?Sized>(
    model: &M,
    theta: &[f64],
    hurst: HurstIndex,
    cfg: &SimConfig,
) -> Result<SimPath> {
    Simulator::new(model, hurst, cfg)?.run(theta, cfg.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConstantSigmaModel, ParamBox, VariableSigmaModel};

    struct Frozen {
        b: ParamBox,
    }

    impl SlowFastModel for Frozen {
        fn name(&self) -> &str {
            "frozen"
        }
        fn slow_dim(&self) -> usize {
            2
        }
        fn fast_dim(&self) -> usize {
            1
        }
        fn noise_dim(&self) -> usize {
            1
        }
        fn param_box(&self) -> &ParamBox {
            &self.b
        }
        fn initial_slow(&self) -> &[f64] {
            &[0.5, -2.0]
        }
        fn initial_fast(&self) -> &[f64] {
            &[0.0]
        }
        fn drift(&self, _: &[f64], _: &[f64], _: &[f64], out: &mut [f64]) {
            out.fill(0.0);
        }
        fn diffusion(&self, _: &[f64], out: &mut [f64]) {
            out.fill(0.0);
        }
        fn fast_drift(&self, y: &[f64], out: &mut [f64]) {
            out[0] = -y[0];
        }
        fn fast_diffusion(&self, _: &[f64], out: &mut [f64]) {
            out[0] = 1.0;
        }
    }

    fn cfg(epsilon: f64, eta: f64, fine_steps: usize, seed: u64) -> SimConfig {
        SimConfig { epsilon, eta, horizon: 1.0, fine_steps, seed }
    }

    #[test]
    fn degenerate_dynamics_stay_put() {
        let m = Frozen { b: ParamBox::interval(0.0, 1.0).unwrap() };
        let h = HurstIndex::new(0.85).unwrap();
        let p = euler_maruyama(&m, &[0.5], h, &cfg(0.1, 0.01, 200, 3)).unwrap();
        for i in 0..=200 {
            assert_eq!(p.slow_at(i), &[0.5, -2.0]);
        }
    }

    #[test]
    fn small_noise_tracks_average() {
        let m = ConstantSigmaModel::new();
        let h = HurstIndex::new(0.85).unwrap();
        // The explicit scheme biases the fast second moment by ≈ Δt/(4η), so the
        // fine grid must resolve η well for the averaging limit to show.
        let p = euler_maruyama(&m, &[1.0], h, &cfg(1e-6, 2e-5, 1 << 22, 11)).unwrap();
        let worst = (0..=p.steps)
            .map(|i| (p.slow_at(i)[0] - (0.5 * p.time(i)).exp()).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.01, "{worst}");
    }

    #[test]
    fn deterministic_per_seed() {
        let m = ConstantSigmaModel::new();
        let h = HurstIndex::new(0.85).unwrap();
        let c = cfg(0.1, 0.01, 1000, 5);
        let a = euler_maruyama(&m, &[1.0], h, &c).unwrap();
        let b = euler_maruyama(&m, &[1.0], h, &c).unwrap();
        assert_eq!(a, b);
        let d = euler_maruyama(&m, &[1.0], h, &SimConfig { seed: 6, ..c }).unwrap();
        assert_ne!(a.slow, d.slow);
    }

    #[test]
    fn circle_wrap() {
        let m = VariableSigmaModel::new();
        let h = HurstIndex::new(0.85).unwrap();
        let p = euler_maruyama(&m, &[1.0], h, &cfg(0.1, 1e-3, 10_000, 1)).unwrap();
        assert!(p.fast.iter().all(|y| (0.0..TAU).contains(y)));
    }

    #[test]
    fn stiffness_flag() {
        assert!(cfg(0.1, 1e-4, 1000, 0).is_stiff());
        assert!(!cfg(0.1, 1e-4, 1_000_000, 0).is_stiff());
    }

    #[test]
    fn overflow_reports_step() {
        let m = ConstantSigmaModel::new().with_param_box(ParamBox::interval(0.0, 1e300).unwrap()).unwrap();
        let h = HurstIndex::new(0.7).unwrap();
        let err = euler_maruyama(&m, &[1e300], h, &cfg(0.1, 0.01, 1000, 2)).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn subsampling() {
        let m = ConstantSigmaModel::new();
        let h = HurstIndex::new(0.85).unwrap();
        let p = euler_maruyama(&m, &[1.0], h, &cfg(0.1, 0.01, 1200, 9)).unwrap();
        let full = p.subsample(1200).unwrap();
        assert_eq!(full.values(), &p.slow[..]);
        let half = p.subsample(600).unwrap();
        for k in 0..=600 {
            assert_eq!(half.at(k), p.slow_at(2 * k));
        }
        assert_eq!(p.subsample(300).unwrap(), half.subsample(300).unwrap());
        assert_eq!(p.subsample(700), Err(Error::NotDivisible { fine: 1200, n: 700 }));
    }
}
