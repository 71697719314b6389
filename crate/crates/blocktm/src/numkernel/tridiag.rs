//! Corner blocks of the inverse of a block-tridiagonal matrix.
//!
//! A forward Schur-complement sweep factors the matrix block row by block
//! row; the corner blocks of the inverse and the log-determinant fall out of
//! the sweep in `O(P * M^3)` for `P` diagonal blocks of size `M`. The sweep
//! has no pivoting across blocks, so it can hit an exactly singular leading
//! Schur complement even when the full matrix is invertible (free chain at
//! band center, for instance); callers fall back to a dense solve there.

use crate::error::{Error, Result};
use crate::numkernel::{get_block, logdet, LogDet};
use crate::CMatrix;

/// Borrowed view of a block-tridiagonal matrix: `diag[k]` on the main block
/// diagonal, `upper[k]` at block `(k, k+1)`, `lower[k]` at block `(k+1, k)`.
pub struct BlockTridiag<'a> {
    pub diag: &'a [CMatrix],
    pub upper: &'a [CMatrix],
    pub lower: &'a [CMatrix],
}

/// The four corner blocks of the inverse, plus the log-determinant.
#[derive(Debug, Clone)]
pub struct TridiagCorners {
    pub c11: CMatrix,
    pub c1n: CMatrix,
    pub cn1: CMatrix,
    pub cnn: CMatrix,
    pub logdet: LogDet,
}

impl BlockTridiag<'_> {
    fn validate(&self) -> Result<usize> {
        let p = self.diag.len();
        if p < 2 {
            return Err(Error::DimensionMismatch(
                "block-tridiagonal sweep needs at least two diagonal blocks".into(),
            ));
        }
        if self.upper.len() != p - 1 || self.lower.len() != p - 1 {
            return Err(Error::DimensionMismatch(format!(
                "expected {} off-diagonal blocks, got {} upper / {} lower",
                p - 1,
                self.upper.len(),
                self.lower.len()
            )));
        }
        let m = self.diag[0].nrows();
        for b in self.diag.iter().chain(self.upper).chain(self.lower) {
            if b.nrows() != m || b.ncols() != m {
                return Err(Error::DimensionMismatch(
                    "all blocks must be square and of equal size".into(),
                ));
            }
        }
        Ok(p)
    }

    /// Dense assembly of the full matrix. Used by the fallback path and by
    /// oracle tests.
    pub fn assemble(&self) -> CMatrix {
        let p = self.diag.len();
        let m = self.diag[0].nrows();
        let mut out = CMatrix::zeros(p * m, p * m);
        for k in 0..p {
            out.view_mut((k * m, k * m), (m, m)).copy_from(&self.diag[k]);
            if k + 1 < p {
                out.view_mut((k * m, (k + 1) * m), (m, m)).copy_from(&self.upper[k]);
                out.view_mut(((k + 1) * m, k * m), (m, m)).copy_from(&self.lower[k]);
            }
        }
        out
    }

    /// Corner blocks of the inverse by the Schur sweep, with a dense fallback
    /// when an intermediate complement is singular.
    pub fn inverse_corners(&self) -> Result<TridiagCorners> {
        match self.inverse_corners_sweep() {
            Ok(c) => Ok(c),
            Err(Error::SingularMatrix) => dense_inverse_corners(&self.assemble(), self.diag[0].nrows()),
            Err(e) => Err(e),
        }
    }

    /// The pure `O(P * M^3)` sweep. Errors with [`Error::SingularMatrix`]
    /// when a leading Schur complement cannot be inverted.
    pub fn inverse_corners_sweep(&self) -> Result<TridiagCorners> {
        let p = self.validate()?;

        // Forward sweep: S_k = D_k - W_{k-1} S_{k-1}^{-1} U_{k-1}.
        // Running products give the (P,1) and (1,P) corners directly:
        //   inv_{P,1} = S_P^{-1} (-W_{P-1} S_{P-1}^{-1}) ... (-W_1 S_1^{-1})
        //   inv_{1,P} = S_1^{-1} (-U_1 S_2^{-1}) ... (-U_{P-1} S_P^{-1})
        let mut s = self.diag[0].clone();
        let mut s_inv = invert(&s)?;
        let mut ld = logdet(&s)?;
        let mut row_prod = s_inv.clone(); // S_1^{-1}, grows rightward for inv_{1,P}
        let mut col_prod = s_inv.clone(); // grows leftward for inv_{P,1}
        for k in 1..p {
            s = &self.diag[k] - &self.lower[k - 1] * &s_inv * &self.upper[k - 1];
            s_inv = invert(&s)?;
            ld = ld.mul(logdet(&s)?);
            row_prod = -(&row_prod * &self.upper[k - 1]) * &s_inv;
            col_prod = -(&s_inv * &self.lower[k - 1]) * &col_prod;
        }
        let cnn = s_inv;
        let c1n = row_prod;
        let cn1 = col_prod;

        // Backward sweep for the (1,1) corner: R_k = D_k - U_k R_{k+1}^{-1} W_k.
        let mut r_inv = invert(&self.diag[p - 1])?;
        for k in (0..p - 1).rev() {
            let r = &self.diag[k] - &self.upper[k] * &r_inv * &self.lower[k];
            r_inv = invert(&r)?;
        }
        let c11 = r_inv;

        Ok(TridiagCorners { c11, c1n, cn1, cnn, logdet: ld })
    }
}

fn invert(a: &CMatrix) -> Result<CMatrix> {
    let inv = a.clone().try_inverse().ok_or(Error::SingularMatrix)?;
    if inv.iter().all(|x| x.re.is_finite() && x.im.is_finite()) {
        Ok(inv)
    } else {
        Err(Error::SingularMatrix)
    }
}

/// Solves `A X = B` for a handful of right-hand-side columns.
pub fn solve_columns(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let lu = a.clone().lu();
    lu.solve(b).ok_or(Error::SingularMatrix)
}

/// Corner blocks of `A^{-1}` from a dense factorization: solve for the first
/// and last `m` columns of the inverse.
pub fn dense_inverse_corners(a: &CMatrix, m: usize) -> Result<TridiagCorners> {
    let size = a.nrows();
    if size != a.ncols() || size < 2 * m || size % m != 0 {
        return Err(Error::DimensionMismatch(format!(
            "corner extraction needs a square matrix of full blocks, got {}x{} with block {}",
            size,
            a.ncols(),
            m
        )));
    }
    let ld = logdet(a)?;
    let mut rhs = CMatrix::zeros(size, 2 * m);
    for j in 0..m {
        rhs[(j, j)] = num_complex::Complex64::new(1.0, 0.0);
        rhs[(size - m + j, m + j)] = num_complex::Complex64::new(1.0, 0.0);
    }
    let cols = solve_columns(a, &rhs)?;
    let blocks = cols.nrows() / m;
    Ok(TridiagCorners {
        c11: get_block(&cols, 0, 0, m),
        cn1: get_block(&cols, blocks - 1, 0, m),
        c1n: get_block(&cols, 0, 1, m),
        cnn: get_block(&cols, blocks - 1, 1, m),
        logdet: ld,
    })
}
