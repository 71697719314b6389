//! The transfer matrix `T(E)`: factorized products, stabilized accumulation,
//! and the corner-block representation through the open resolvent.

use crate::chain::BlockChain;
use crate::error::{Error, Result};
use crate::numkernel::{logdet, LogDet};
use crate::resolvent::CornerBlocks;
use crate::{CMatrix, CVector};
use num_complex::Complex64;

/// Renormalization stride for the stabilized product.
pub const DEFAULT_QR_STRIDE: usize = 8;
/// Entry magnitude that forces an early renormalization regardless of stride.
const FORCE_RENORM_AT: f64 = 1e60;

/// A `2M x 2M` transfer matrix tagged with the energy it was built at.
///
/// The represented matrix is `exp(scale) * mat`; plain products keep
/// `scale = 0`. `det_log` is a running ledger of the product determinant,
/// accumulated factor by factor, so the unimodularity `|det T(E)| = 1` stays
/// checkable when the entries of the product itself overflow.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    energy: Complex64,
    mat: CMatrix,
    scale: f64,
    det_log: LogDet,
}

impl TransferMatrix {
    /// Wraps an explicit matrix (scale 0); the determinant ledger is taken
    /// from the matrix itself.
    pub fn from_matrix(energy: Complex64, mat: CMatrix) -> Result<Self> {
        let det_log = logdet(&mat)?;
        Ok(TransferMatrix { energy, mat, scale: 0.0, det_log })
    }

    pub fn energy(&self) -> Complex64 {
        self.energy
    }

    /// The stored (possibly rescaled) matrix.
    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    /// Log-scale ledger: the represented product is `exp(scale) * mat`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Ledger of the full product determinant.
    pub fn det_log(&self) -> LogDet {
        self.det_log
    }

    /// Half the block dimension: the chain block size `M`.
    pub fn half_size(&self) -> usize {
        self.mat.nrows() / 2
    }

    /// `|log |det T||` — distance of the product determinant from modulus 1.
    pub fn det_modulus_defect(&self) -> f64 {
        self.det_log.log_mag.abs()
    }

    /// Inverse of the represented matrix; only sensible for plain products.
    pub fn inverse(&self) -> Result<CMatrix> {
        let inv = self.mat.clone().try_inverse().ok_or(Error::SingularMatrix)?;
        Ok(inv / Complex64::new(self.scale.exp(), 0.0))
    }
}

/// Single-slice factor `[[E - H_k, -I], [I, 0]]`; unit determinant.
pub fn step_factor(h_k: &CMatrix, e: Complex64) -> CMatrix {
    let m = h_k.nrows();
    let mut out = CMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            out[(i, j)] = -h_k[(i, j)];
        }
        out[(i, i)] += e;
        out[(i, m + i)] = Complex64::new(-1.0, 0.0);
        out[(m + i, i)] = Complex64::new(1.0, 0.0);
    }
    out
}

/// Coupling factor `diag(L_k^{-1}, L_k^dagger)`.
pub fn coupling_factor(l_k: &CMatrix) -> Result<CMatrix> {
    let m = l_k.nrows();
    let inv = l_k.clone().try_inverse().ok_or(Error::SingularCoupling {
        index: usize::MAX,
        ratio: 0.0,
    })?;
    let adj = l_k.adjoint();
    let mut out = CMatrix::zeros(2 * m, 2 * m);
    out.view_mut((0, 0), (m, m)).copy_from(&inv);
    out.view_mut((m, m), (m, m)).copy_from(&adj);
    Ok(out)
}

/// `sigma_2 = [[0, -I], [I, 0]]` of block size `m`.
pub fn symplectic_form(m: usize) -> CMatrix {
    let mut out = CMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        out[(i, m + i)] = Complex64::new(-1.0, 0.0);
        out[(m + i, i)] = Complex64::new(1.0, 0.0);
    }
    out
}

fn accumulate(chain: &BlockChain, e: Complex64, stride: Option<usize>) -> Result<TransferMatrix> {
    let h = chain.diagonal_blocks();
    let l = chain.couplings();
    let mut mat = step_factor(&h[0], e);
    let mut det_log = LogDet::one(); // step factors have det 1 exactly
    let mut scale = 0.0_f64;
    for k in 1..chain.slices() {
        let sigma = coupling_factor(&l[k - 1]).map_err(|_| Error::SingularCoupling {
            index: k - 1,
            ratio: 0.0,
        })?;
        mat = step_factor(&h[k], e) * (sigma * mat);
        let ld_l = logdet(&l[k - 1]).map_err(|_| Error::SingularCoupling { index: k - 1, ratio: 0.0 })?;
        let ld_ladj = logdet(&l[k - 1].adjoint())
            .map_err(|_| Error::SingularCoupling { index: k - 1, ratio: 0.0 })?;
        det_log = det_log.mul(ld_ladj.div(ld_l));
        if let Some(every) = stride {
            let max_entry = mat.camax();
            if k % every == 0 || max_entry > FORCE_RENORM_AT {
                renormalize(&mut mat, &mut scale);
            }
        }
    }
    Ok(TransferMatrix { energy: e, mat, scale, det_log })
}

/// Extracts a scalar magnitude via a QR pass and folds it into the scale
/// ledger, keeping the stored matrix O(1).
fn renormalize(mat: &mut CMatrix, scale: &mut f64) {
    let r = mat.clone().qr().unpack_r();
    let s = r.camax();
    if s.is_finite() && s > 0.0 {
        *mat /= Complex64::new(s, 0.0);
        *scale += s.ln();
    }
}

/// The ordered product `T_N Sigma_{N-1} ... Sigma_1 T_1`, unscaled.
pub fn transfer_product(chain: &BlockChain, e: Complex64) -> Result<TransferMatrix> {
    accumulate(chain, e, None)
}

/// The same product with periodic QR renormalization at the default stride.
///
/// `exp(scale) * mat` reproduces the plain product wherever the latter is
/// representable; the determinant ledger stays exact at any length.
pub fn transfer_product_stabilized(chain: &BlockChain, e: Complex64) -> Result<TransferMatrix> {
    accumulate(chain, e, Some(DEFAULT_QR_STRIDE))
}

/// Stabilized product with an explicit renormalization stride.
pub fn transfer_product_stabilized_with(
    chain: &BlockChain,
    e: Complex64,
    stride: usize,
) -> Result<TransferMatrix> {
    accumulate(chain, e, Some(stride.max(1)))
}

/// `T(E)^{-1}` built as the reversed product of exact factor inverses.
///
/// Numerically inverting an assembled `T(E)` destroys the small singular
/// directions, which are exactly the ones that dominate `T^{-1}`; the
/// reversed product accumulates them directly instead.
pub fn inverse_transfer_product(chain: &BlockChain, e: Complex64) -> Result<TransferMatrix> {
    let h = chain.diagonal_blocks();
    let l = chain.couplings();
    let m = chain.block_size();
    // inverse of a step factor: [[0, I], [-I, E - H]]
    let inv_step = |h_k: &CMatrix| -> CMatrix {
        let mut out = CMatrix::zeros(2 * m, 2 * m);
        for i in 0..m {
            out[(i, m + i)] = Complex64::new(1.0, 0.0);
            out[(m + i, i)] = Complex64::new(-1.0, 0.0);
            for j in 0..m {
                out[(m + i, m + j)] = -h_k[(i, j)];
            }
            out[(m + i, m + i)] += e;
        }
        out
    };
    // inverse of a coupling factor: diag(L, L^{-dagger})
    let inv_coupling = |l_k: &CMatrix, index: usize| -> Result<CMatrix> {
        let adj_inv = l_k
            .adjoint()
            .try_inverse()
            .ok_or(Error::SingularCoupling { index, ratio: 0.0 })?;
        let mut out = CMatrix::zeros(2 * m, 2 * m);
        out.view_mut((0, 0), (m, m)).copy_from(l_k);
        out.view_mut((m, m), (m, m)).copy_from(&adj_inv);
        Ok(out)
    };
    let mut mat = inv_step(&h[0]);
    let mut det_log = LogDet::one();
    for k in 1..chain.slices() {
        mat = mat * inv_coupling(&l[k - 1], k - 1)? * inv_step(&h[k]);
        let ld_l = logdet(&l[k - 1]).map_err(|_| Error::SingularCoupling { index: k - 1, ratio: 0.0 })?;
        let ld_ladj = logdet(&l[k - 1].adjoint())
            .map_err(|_| Error::SingularCoupling { index: k - 1, ratio: 0.0 })?;
        det_log = det_log.mul(ld_l.div(ld_ladj));
    }
    Ok(TransferMatrix { energy: e, mat, scale: 0.0, det_log })
}

/// Applies the transfer matrix to boundary data.
///
/// Input: `psi1` and the pre-multiplied inflow `L_0^dagger psi_0`; output:
/// the outflow `L_N psi_{N+1}` and `psi_N`.
pub fn apply_transfer(t: &TransferMatrix, psi1: &CVector, inflow: &CVector) -> (CVector, CVector) {
    let m = t.half_size();
    assert_eq!(psi1.len(), m, "psi1 has wrong dimension");
    assert_eq!(inflow.len(), m, "inflow has wrong dimension");
    let mut v = CVector::zeros(2 * m);
    v.rows_mut(0, m).copy_from(psi1);
    v.rows_mut(m, m).copy_from(inflow);
    let w = t.matrix() * v * Complex64::new(t.scale().exp(), 0.0);
    (w.rows(0, m).into_owned(), w.rows(m, m).into_owned())
}

/// Rebuilds `T(E)` from the corner blocks of the open resolvent:
/// `[[-G1N^{-1}, -G1N^{-1} G11], [GNN G1N^{-1}, -GN1 + GNN G1N^{-1} G11]]`.
pub fn transfer_from_resolvent(cb: &CornerBlocks) -> Result<TransferMatrix> {
    if cb.twist.is_some() {
        return Err(Error::DimensionMismatch(
            "transfer representation needs open resolvent corners, got twisted".into(),
        ));
    }
    let m = cb.g11.nrows();
    let g1n_inv = cb.g1n.clone().try_inverse().ok_or(Error::CornerSingular)?;
    if !g1n_inv.iter().all(|x| x.re.is_finite() && x.im.is_finite()) {
        return Err(Error::CornerSingular);
    }
    let mut out = CMatrix::zeros(2 * m, 2 * m);
    let tl = -&g1n_inv;
    let tr = -&g1n_inv * &cb.g11;
    let bl = &cb.gnn * &g1n_inv;
    let br = -&cb.gn1 + &cb.gnn * &g1n_inv * &cb.g11;
    out.view_mut((0, 0), (m, m)).copy_from(&tl);
    out.view_mut((0, m), (m, m)).copy_from(&tr);
    out.view_mut((m, 0), (m, m)).copy_from(&bl);
    out.view_mut((m, m), (m, m)).copy_from(&br);
    TransferMatrix::from_matrix(cb.energy, out)
}

/// Frobenius defect of the symplectic property
/// `T(E*)^dagger sigma_2 T(E) = sigma_2`, from two plain products.
pub fn symplectic_defect(chain: &BlockChain, e: Complex64) -> Result<f64> {
    let t = transfer_product(chain, e)?;
    let t_conj = transfer_product(chain, e.conj())?;
    Ok(symplectic_defect_of(t_conj.matrix(), t.matrix()))
}

/// Defect `||A^dagger sigma_2 B - sigma_2||_F` for explicit matrices.
pub fn symplectic_defect_of(t_at_conj_e: &CMatrix, t_at_e: &CMatrix) -> f64 {
    let m = t_at_e.nrows() / 2;
    let sigma = symplectic_form(m);
    (t_at_conj_e.adjoint() * &sigma * t_at_e - &sigma).norm()
}
