//! Dense linear-algebra helpers on top of `nalgebra`.

use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

/// Eigenvalues of the symmetric part `(A + Aᵀ)/2`, ascending.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> DVector<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let mut values = SymmetricEigen::new(sym).eigenvalues;
    values.as_mut_slice().sort_by(|x, y| x.total_cmp(y));
    values
}

pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let values = symmetric_eigenvalues(a);
    if values.is_empty() {
        0.0
    } else {
        values[0]
    }
}

/// Cholesky factorization with a single jitter attempt: if the plain
/// factorization fails, `δ·I` with `δ = 10⁻¹²·trace/dim` is added once.
/// Returns the factor and the jitter that was applied.
pub fn cholesky_with_jitter(a: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(c) = a.clone().cholesky() {
        return Ok((c, 0.0));
    }
    let dim = a.nrows().max(1) as f64;
    let jitter = 1e-12 * a.trace().abs() / dim;
    let shifted = a + DMatrix::identity(a.nrows(), a.ncols()) * jitter;
    shifted.cholesky().map(|c| (c, jitter)).ok_or(Error::FactorizationFailed { jitter })
}

/// Inverse of a small symmetric positive-definite matrix.
pub fn spd_inverse(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular(alloc::format!("{what} has non-finite entries")));
    }
    a.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Singular(alloc::format!("{what} is not positive definite")))
}

/// `Aᵀ B A`.
pub fn congruence(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.transpose() * b * a
}

/// Symmetrizes in place by averaging with the transpose.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}
