//! Numerical primitives: overflow-safe log-determinants, block-tridiagonal
//! corner solves, eigensolves and periodic quadrature.

mod eigen;
mod logdet;
mod quad;
mod tridiag;

pub use eigen::{eigenvector_for, general_eigenvalues, hermitian_eigenvalues};
pub use logdet::{logdet, wrap_angle, LogDet};
pub use quad::{periodic_quadrature, QuadratureResult, DEFAULT_MAX_NODES};
pub use tridiag::{dense_inverse_corners, solve_columns, BlockTridiag, TridiagCorners};

use crate::CMatrix;
use num_complex::Complex64;

/// Identity matrix of the given size.
pub fn identity(size: usize) -> CMatrix {
    CMatrix::identity(size, size)
}

/// Frobenius-norm Hermiticity defect `||A - A^dagger||`.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    (a - a.adjoint()).norm()
}

/// Copies `block` into `target` at block position (`bi`, `bj`) on an `m`-grid.
pub fn set_block(target: &mut CMatrix, bi: usize, bj: usize, m: usize, block: &CMatrix) {
    target.view_mut((bi * m, bj * m), (m, m)).copy_from(block);
}

/// Adds `alpha * I` into the (`bi`, `bj`) block of `target`.
pub fn add_scaled_identity_block(target: &mut CMatrix, bi: usize, bj: usize, m: usize, alpha: Complex64) {
    for k in 0..m {
        target[(bi * m + k, bj * m + k)] += alpha;
    }
}

/// Extracts the `m x m` block at block position (`bi`, `bj`).
pub fn get_block(source: &CMatrix, bi: usize, bj: usize, m: usize) -> CMatrix {
    source.view((bi * m, bj * m), (m, m)).into_owned()
}

/// Assembles `[[tl, tr], [bl, br]]` from four equally sized square blocks.
pub fn block2x2(tl: &CMatrix, tr: &CMatrix, bl: &CMatrix, br: &CMatrix) -> CMatrix {
    let m = tl.nrows();
    let mut out = CMatrix::zeros(2 * m, 2 * m);
    out.view_mut((0, 0), (m, m)).copy_from(tl);
    out.view_mut((0, m), (m, m)).copy_from(tr);
    out.view_mut((m, 0), (m, m)).copy_from(bl);
    out.view_mut((m, m), (m, m)).copy_from(br);
    out
}

/// Stacks two `m x m` blocks vertically into a `2m x m` matrix.
pub fn stack2(top: &CMatrix, bottom: &CMatrix) -> CMatrix {
    let m = top.nrows();
    let mut out = CMatrix::zeros(2 * m, top.ncols());
    out.view_mut((0, 0), (m, top.ncols())).copy_from(top);
    out.view_mut((m, 0), (m, top.ncols())).copy_from(bottom);
    out
}
