//! Eigensolve wrappers with the conventions the identity checks rely on.

use crate::error::{Error, Result};
use crate::{CMatrix, CVector};
use num_complex::Complex64;

const EIGEN_EPS: f64 = 1e-14;
const EIGEN_MAX_ITER: usize = 200_000;

/// Eigenvalues of a Hermitian matrix, ascending.
///
/// The input is symmetrized as `(A + A^dagger)/2` first; callers are expected
/// to pass matrices that are Hermitian up to roundoff.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Result<Vec<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "eigensolve needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let sym = (a + a.adjoint()).scale(0.5);
    let decomp = sym
        .try_symmetric_eigen(EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or(Error::ConvergenceFailure)?;
    let mut vals: Vec<f64> = decomp.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Eigenvalues of a general complex matrix, sorted by `(|t|, arg t)`.
pub fn general_eigenvalues(a: &CMatrix) -> Result<Vec<Complex64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "eigensolve needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = a
        .clone()
        .try_schur(EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or(Error::ConvergenceFailure)?;
    let vals = schur.eigenvalues().ok_or(Error::ConvergenceFailure)?;
    let mut out: Vec<Complex64> = vals.iter().copied().collect();
    out.sort_by(|x, y| {
        x.norm()
            .total_cmp(&y.norm())
            .then_with(|| x.arg().total_cmp(&y.arg()))
    });
    Ok(out)
}

/// An eigenvector for a known eigenvalue, by shifted inverse iteration.
///
/// `lambda` may carry roundoff; the shift is perturbed off the exact
/// eigenvalue so the solve stays well-defined, which is the standard trick —
/// the solution still aligns with the eigenvector direction.
pub fn eigenvector_for(a: &CMatrix, lambda: Complex64) -> Result<CVector> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "eigenvector solve needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let scale = a.norm().max(lambda.norm()).max(1.0);
    let shift = lambda + Complex64::new(1e-11, 1e-11) * scale;
    let mut shifted = a.clone();
    for k in 0..n {
        shifted[(k, k)] -= shift;
    }
    let lu = shifted.lu();
    // deterministic, structure-free start vector
    let mut v = CVector::from_fn(n, |i, _| {
        Complex64::new(1.0 + (i as f64 + 1.0).sin() * 0.25, (i as f64 + 1.0).cos() * 0.25)
    });
    v /= Complex64::new(v.norm(), 0.0);
    let mut best_residual = f64::INFINITY;
    let mut best = v.clone();
    for _ in 0..5 {
        let Some(next) = lu.solve(&v) else {
            return Err(Error::SingularMatrix);
        };
        let norm = next.norm();
        if !norm.is_finite() || norm == 0.0 {
            break;
        }
        v = next / Complex64::new(norm, 0.0);
        let residual = (a * &v - &v * lambda).norm();
        if residual < best_residual {
            best_residual = residual;
            best = v.clone();
        }
        if residual < 1e-12 * scale {
            break;
        }
    }
    if best_residual.is_finite() {
        Ok(best)
    } else {
        Err(Error::ConvergenceFailure)
    }
}
