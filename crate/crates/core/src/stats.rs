//! Order-independent summary statistics.

use alloc::vec::Vec;
#[allow(unused_imports)] // unused when a dependency links std
use num_traits::Float;

/// Neumaier-compensated sum of `values` after sorting, so the result does not
/// depend on input order.
pub fn stable_sum(values: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in &sorted {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(stable_sum(values) / values.len() as f64)
    }
}

/// Sample standard deviation with divisor `R − 1`.
pub fn sample_sd(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let sq: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    Some((stable_sum(&sq) / (values.len() - 1) as f64).sqrt())
}

/// Monte Carlo standard error of the mean, `sd/√R`.
pub fn standard_error(values: &[f64]) -> Option<f64> {
    sample_sd(values).map(|s| s / (values.len() as f64).sqrt())
}

/// Sample covariance of paired observations, divisor `R − 1`.
pub fn sample_covariance(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let ma = mean(a)?;
    let mb = mean(b)?;
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    Some(stable_sum(&prods) / (a.len() - 1) as f64)
}

/// Mean, sample sd and standard error of a set of replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub standard_error: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        let mean = mean(values)?;
        let sd = sample_sd(values).unwrap_or(f64::NAN);
        Some(Summary {
            count: values.len(),
            mean,
            sd,
            standard_error: sd / (values.len() as f64).sqrt(),
        })
    }
}
