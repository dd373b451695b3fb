//! Simulation and inference for small-noise slow-fast systems driven by
//! fractional Brownian motion.
//!
//! The slow component `X` evolves as
//! `dX = c_θ(X, Y) dt + √ε σ(Y) dW^H` while the fast component `Y` is an
//! ergodic diffusion on time scale `η`. This crate provides:
//!
//! - exact fBm synthesis and the Hurst-related analytic constants ([`fbm`]),
//! - the slow-fast model class and an Euler–Maruyama simulator ([`model`], [`sim`]),
//! - the averaged system, its fundamental matrix and the fluctuation
//!   covariance ([`averaging`]),
//! - two Hurst-index estimators ([`hurst`]),
//! - the trajectory-fitting and minimum-contrast drift estimators with their
//!   asymptotic variances ([`drift`]),
//! - summary statistics and seed derivation for Monte Carlo studies ([`stats`], [`seed`]).
//!
//! The crate is `no_std` and only needs `alloc`. IO, configuration files,
//! parallel replication and the command-line interface live in the `slowfast`
//! companion crate.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod averaging;
pub mod drift;
mod error;
pub mod fbm;
mod fft;
pub mod hurst;
pub mod linalg;
pub mod model;
pub mod seed;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use fbm::HurstIndex;
pub use model::{ConstantSigmaModel, ParamBox, SlowFastModel, VariableSigmaModel};
pub use sim::{ObservationSeries, SimConfig};
