//! Corner blocks of the open and twisted resolvents, the representation of
//! `(T(E) - z)^{-1}`, the trace identity relating it to the twisted
//! resolvent, and the coupling relations between the two resolvents.
//!
//! Conventions: `G(E) = (H - E)^{-1}` for the open chain and
//! `Gt(z, E) = (H(z) - E)^{-1}` for the twisted one.

use crate::chain::BlockChain;
use crate::error::{Error, Result};
use crate::numkernel::{
    block2x2, dense_inverse_corners, identity, logdet, solve_columns, stack2, wrap_angle,
    BlockTridiag, LogDet, TridiagCorners,
};
use crate::transfer::{transfer_product, TransferMatrix};
use crate::CMatrix;
use num_complex::Complex64;

/// Above this size the twisted corner blocks switch from a dense solve to the
/// sweep-plus-coupling path.
pub const DENSE_SIZE_LIMIT: usize = 2048;
/// Residual threshold flagging `z` as an eigenvalue of `T(E)`.
const TRANSFER_HIT_TOL: f64 = 1e-6;

/// The four `M x M` corner blocks of a resolvent, tagged with the energy and,
/// for the twisted case, the boundary parameter.
#[derive(Debug, Clone)]
pub struct CornerBlocks {
    pub g11: CMatrix,
    pub g1n: CMatrix,
    pub gn1: CMatrix,
    pub gnn: CMatrix,
    pub energy: Complex64,
    /// `None` for the open resolvent, `Some(z)` for the twisted one.
    pub twist: Option<Complex64>,
}

fn open_blocks(chain: &BlockChain, e: Complex64) -> (Vec<CMatrix>, Vec<CMatrix>, Vec<CMatrix>) {
    let m = chain.block_size();
    let diag: Vec<CMatrix> = chain
        .diagonal_blocks()
        .iter()
        .map(|h| {
            let mut d = h.clone();
            for i in 0..m {
                d[(i, i)] -= e;
            }
            d
        })
        .collect();
    let upper: Vec<CMatrix> = chain.couplings().to_vec();
    let lower: Vec<CMatrix> = chain.couplings().iter().map(CMatrix::adjoint).collect();
    (diag, upper, lower)
}

/// Corner blocks of the open resolvent `G = (H - E)^{-1}` by the
/// `O(N M^3)` Schur sweep (dense fallback at degenerate energies).
pub fn corner_blocks_sweep(chain: &BlockChain, e: Complex64) -> Result<CornerBlocks> {
    let (diag, upper, lower) = open_blocks(chain, e);
    let tri = BlockTridiag { diag: &diag, upper: &upper, lower: &lower };
    let corners = tri.inverse_corners().map_err(at_eigenvalue)?;
    Ok(CornerBlocks {
        g11: corners.c11,
        g1n: corners.c1n,
        gn1: corners.cn1,
        gnn: corners.cnn,
        energy: e,
        twist: None,
    })
}

fn at_eigenvalue(e: Error) -> Error {
    match e {
        Error::SingularMatrix => Error::ResolventAtEigenvalue,
        other => other,
    }
}

/// Capacitance matrix of a corner twist against given inverse corners:
/// `[[I + z c1n, (1/z) c11], [z cnn, I + (1/z) cn1]]`.
///
/// Its determinant carries the full `z`-dependence of the twisted
/// determinant, and solving against it turns open corners into twisted ones.
pub(crate) fn corner_capacitance(
    c11: &CMatrix,
    c1n: &CMatrix,
    cn1: &CMatrix,
    cnn: &CMatrix,
    z: Complex64,
) -> CMatrix {
    let m = c11.nrows();
    let zinv = z.inv();
    let tl = identity(m) + c1n * z;
    let tr = c11 * zinv;
    let bl = cnn * z;
    let br = identity(m) + cn1 * zinv;
    block2x2(&tl, &tr, &bl, &br)
}

fn capacitance(open: &CornerBlocks, z: Complex64) -> CMatrix {
    corner_capacitance(&open.g11, &open.g1n, &open.gn1, &open.gnn, z)
}

/// Corner blocks of the twisted resolvent `Gt = (H(z) - E)^{-1}`.
///
/// Desk-scale systems use a dense factorization; beyond
/// [`DENSE_SIZE_LIMIT`] the open-corner sweep plus the coupling relations
/// between the two resolvents take over.
pub fn twisted_corner_blocks(chain: &BlockChain, e: Complex64, z: Complex64) -> Result<CornerBlocks> {
    if z == Complex64::ZERO {
        return Err(Error::ZeroTwist);
    }
    if chain.slices() * chain.block_size() <= DENSE_SIZE_LIMIT {
        twisted_corner_blocks_dense(chain, e, z)
    } else {
        twisted_corner_blocks_via_coupling(chain, e, z)
    }
}

/// Dense-path twisted corners.
pub fn twisted_corner_blocks_dense(
    chain: &BlockChain,
    e: Complex64,
    z: Complex64,
) -> Result<CornerBlocks> {
    if z == Complex64::ZERO {
        return Err(Error::ZeroTwist);
    }
    let mut a = chain.twisted_hamiltonian(z)?.into_matrix();
    for i in 0..a.nrows() {
        a[(i, i)] -= e;
    }
    let corners: TridiagCorners =
        dense_inverse_corners(&a, chain.block_size()).map_err(at_eigenvalue)?;
    Ok(CornerBlocks {
        g11: corners.c11,
        g1n: corners.c1n,
        gn1: corners.cn1,
        gnn: corners.cnn,
        energy: e,
        twist: Some(z),
    })
}

/// Twisted corners from open corners through the coupling relations:
/// one `2M x 2M` solve against the capacitance matrix.
pub fn twisted_corner_blocks_via_coupling(
    chain: &BlockChain,
    e: Complex64,
    z: Complex64,
) -> Result<CornerBlocks> {
    if z == Complex64::ZERO {
        return Err(Error::ZeroTwist);
    }
    let open = corner_blocks_sweep(chain, e)?;
    let m = chain.block_size();
    let cap = capacitance(&open, z);
    let rhs = block2x2(&open.g11, &open.g1n, &open.gn1, &open.gnn);
    let sol = solve_columns(&cap, &rhs).map_err(at_eigenvalue)?;
    Ok(CornerBlocks {
        g11: sol.view((0, 0), (m, m)).into_owned(),
        g1n: sol.view((0, m), (m, m)).into_owned(),
        gn1: sol.view((m, 0), (m, m)).into_owned(),
        gnn: sol.view((m, m), (m, m)).into_owned(),
        energy: e,
        twist: Some(z),
    })
}

/// `(T(E) - z)^{-1}` assembled from twisted resolvent corners:
/// `[[-Gt1N, (1/z) Gt11], [-(1/z) GtNN, (1/z^2) GtN1 - (1/z) I]]`.
///
/// A residual check against `T(E) - z` guards the assembly; failure means
/// `z` sits on the spectrum of `T(E)`.
pub fn transfer_resolvent(chain: &BlockChain, e: Complex64, z: Complex64) -> Result<CMatrix> {
    let tm = transfer_product(chain, e)?;
    transfer_resolvent_with(chain, &tm, e, z)
}

/// Same as [`transfer_resolvent`] reusing an already built `T(E)`.
pub fn transfer_resolvent_with(
    chain: &BlockChain,
    tm: &TransferMatrix,
    e: Complex64,
    z: Complex64,
) -> Result<CMatrix> {
    if z == Complex64::ZERO {
        return Err(Error::ZeroTwist);
    }
    // E on the spectrum of H(z) is dual to z on the spectrum of T(E)
    let gt = twisted_corner_blocks(chain, e, z).map_err(|err| match err {
        Error::ResolventAtEigenvalue => Error::TransferEigenvalueHit { residual: f64::INFINITY },
        other => other,
    })?;
    let m = chain.block_size();
    let zinv = z.inv();
    let tl = -&gt.g1n;
    let tr = &gt.g11 * zinv;
    let bl = -(&gt.gnn * zinv);
    let br = &gt.gn1 * (zinv * zinv) - identity(m) * zinv;
    let assembled = block2x2(&tl, &tr, &bl, &br);
    let shifted = tm.matrix() - identity(2 * m) * z;
    let residual = (&assembled * &shifted - identity(2 * m)).norm();
    if residual > TRANSFER_HIT_TOL {
        return Err(Error::TransferEigenvalueHit { residual });
    }
    Ok(assembled)
}

/// Both sides of the trace identity
/// `tr (T(E) - z)^{-1} = -M/z - tr Gt1N + (1/z^2) tr GtN1`.
#[derive(Debug, Clone, Copy)]
pub struct TraceIdentity {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub residual: f64,
}

pub fn trace_identity_check(chain: &BlockChain, e: Complex64, z: Complex64) -> Result<TraceIdentity> {
    if z == Complex64::ZERO {
        return Err(Error::ZeroTwist);
    }
    let m = chain.block_size();
    let tm = transfer_product(chain, e)?;
    let shifted = tm.matrix() - identity(2 * m) * z;
    let inv = shifted.try_inverse().ok_or(Error::TransferEigenvalueHit { residual: f64::INFINITY })?;
    let lhs = trace(&inv);
    let gt = twisted_corner_blocks(chain, e, z)?;
    let zinv = z.inv();
    let m_f = m as f64;
    let rhs = -Complex64::new(m_f, 0.0) * zinv - trace(&gt.g1n) + trace(&gt.gn1) * (zinv * zinv);
    Ok(TraceIdentity { lhs, rhs, residual: (lhs - rhs).norm() })
}

fn trace(a: &CMatrix) -> Complex64 {
    (0..a.nrows()).map(|i| a[(i, i)]).sum()
}

/// The two sign variants of the derivative form of the trace identity.
///
/// `lhs = tr (T(E) - z)^{-1}` is compared against
/// `-M/z -/+ d/dz log det[E - H(z)]`, the derivative evaluated by central
/// differences of the log-determinant. Only the minus variant is an
/// identity; both values are reported so the discrepancy stays visible.
#[derive(Debug, Clone, Copy)]
pub struct TraceVariants {
    pub lhs: Complex64,
    pub rhs_minus: Complex64,
    pub rhs_plus: Complex64,
}

pub fn resolvent_trace_variants(
    chain: &BlockChain,
    e: Complex64,
    z: Complex64,
) -> Result<TraceVariants> {
    if z == Complex64::ZERO {
        return Err(Error::ZeroTwist);
    }
    let m = chain.block_size();
    let tm = transfer_product(chain, e)?;
    let shifted = tm.matrix() - identity(2 * m) * z;
    let inv = shifted.try_inverse().ok_or(Error::TransferEigenvalueHit { residual: f64::INFINITY })?;
    let lhs = trace(&inv);

    let det = TwistedDeterminant::prepare(chain, e);
    let h = 1e-6 * z.norm().max(1.0);
    let plus = det.eval(z + Complex64::new(h, 0.0))?;
    let minus = det.eval(z - Complex64::new(h, 0.0))?;
    let delta = Complex64::new(
        plus.log_mag - minus.log_mag,
        wrap_angle(plus.phase - minus.phase),
    );
    let derivative = delta / Complex64::new(2.0 * h, 0.0);
    let base = -Complex64::new(m as f64, 0.0) / z;
    Ok(TraceVariants {
        lhs,
        rhs_minus: base - derivative,
        rhs_plus: base + derivative,
    })
}

/// Worst blockwise relative residual of the coupling relations
/// `G_ij = Gt_ij + (1/z) G_i1 GtNj + z G_iN Gt1j` over `i, j` in `{1, N}`.
///
/// Each equation is normalized by its largest participating term: the
/// relation multiplies two resolvents, so its absolute scale grows with
/// `||G|| * ||Gt||` near either spectrum.
pub fn lippmann_schwinger_check(chain: &BlockChain, e: Complex64, z: Complex64) -> Result<f64> {
    let g = corner_blocks_sweep(chain, e)?;
    let gt = twisted_corner_blocks_dense(chain, e, z)?;
    let zinv = z.inv();
    let pick_open = |i: usize, j: usize| -> &CMatrix {
        match (i, j) {
            (0, 0) => &g.g11,
            (0, 1) => &g.g1n,
            (1, 0) => &g.gn1,
            _ => &g.gnn,
        }
    };
    let pick_twisted = |i: usize, j: usize| -> &CMatrix {
        match (i, j) {
            (0, 0) => &gt.g11,
            (0, 1) => &gt.g1n,
            (1, 0) => &gt.gn1,
            _ => &gt.gnn,
        }
    };
    let mut worst = 0.0_f64;
    for i in 0..2 {
        for j in 0..2 {
            let through_end = pick_open(i, 0) * pick_twisted(1, j) * zinv;
            let through_start = pick_open(i, 1) * pick_twisted(0, j) * z;
            let res = pick_open(i, j) - pick_twisted(i, j) - &through_end - &through_start;
            let scale = pick_open(i, j)
                .norm()
                .max(pick_twisted(i, j).norm())
                .max(through_end.norm())
                .max(through_start.norm())
                .max(1.0);
            worst = worst.max(res.norm() / scale);
        }
    }
    Ok(worst)
}

/// Defect of the open boundary identities: `T [G11; -I] = [0; GN1]` and
/// `T [G1N; 0] = [-I; GNN]`.
pub fn boundary_identities_defect(chain: &BlockChain, e: Complex64) -> Result<f64> {
    let tm = transfer_product(chain, e)?;
    let g = corner_blocks_sweep(chain, e)?;
    let m = chain.block_size();
    let lhs1 = tm.matrix() * stack2(&g.g11, &(-identity(m)));
    let rhs1 = stack2(&CMatrix::zeros(m, m), &g.gn1);
    let lhs2 = tm.matrix() * stack2(&g.g1n, &CMatrix::zeros(m, m));
    let rhs2 = stack2(&(-identity(m)), &g.gnn);
    Ok((lhs1 - rhs1).norm().max((lhs2 - rhs2).norm()))
}

/// Defect of the joint twisted boundary relation
/// `T [[Gt1N, Gt11], [(1/z) GtNN, (1/z) GtN1 - I]] =
///  [[z Gt1N - I, z Gt11], [GtNN, GtN1]]`.
pub fn twisted_boundary_defect(chain: &BlockChain, e: Complex64, z: Complex64) -> Result<f64> {
    if z == Complex64::ZERO {
        return Err(Error::ZeroTwist);
    }
    let tm = transfer_product(chain, e)?;
    let gt = twisted_corner_blocks(chain, e, z)?;
    let m = chain.block_size();
    let zinv = z.inv();
    let right = block2x2(
        &gt.g1n,
        &gt.g11,
        &(&gt.gnn * zinv),
        &(&gt.gn1 * zinv - identity(m)),
    );
    let left = block2x2(
        &(&gt.g1n * z - identity(m)),
        &(&gt.g11 * z),
        &gt.gnn,
        &gt.gn1,
    );
    Ok((tm.matrix() * right - left).norm())
}

/// Prepared evaluator for `log det[E - H(z)]` as a function of `z`.
///
/// One corner sweep of the open chain reduces each evaluation to a
/// `2M x 2M` capacitance determinant; if the open system is degenerate at
/// this energy the evaluator falls back to a dense factorization per call.
pub struct TwistedDeterminant<'a> {
    chain: &'a BlockChain,
    e: Complex64,
    inner: DetInner,
}

enum DetInner {
    Capacitance { base: LogDet, open: CornerBlocks },
    Dense,
}

impl<'a> TwistedDeterminant<'a> {
    pub fn prepare(chain: &'a BlockChain, e: Complex64) -> Self {
        // sweep on E - H so the base log-determinant needs no sign fixup
        let m = chain.block_size();
        let diag: Vec<CMatrix> = chain
            .diagonal_blocks()
            .iter()
            .map(|h| {
                let mut d = -h.clone();
                for i in 0..m {
                    d[(i, i)] += e;
                }
                d
            })
            .collect();
        let upper: Vec<CMatrix> = chain.couplings().iter().map(|l| -l).collect();
        let lower: Vec<CMatrix> = chain.couplings().iter().map(|l| -l.adjoint()).collect();
        let tri = BlockTridiag { diag: &diag, upper: &upper, lower: &lower };
        let inner = match tri.inverse_corners() {
            Ok(corners) => {
                let healthy = [&corners.c11, &corners.c1n, &corners.cn1, &corners.cnn]
                    .iter()
                    .all(|c| c.norm() < 1e8);
                if healthy {
                    // corners of (E - H)^{-1} = -G
                    let open = CornerBlocks {
                        g11: -&corners.c11,
                        g1n: -&corners.c1n,
                        gn1: -&corners.cn1,
                        gnn: -&corners.cnn,
                        energy: e,
                        twist: None,
                    };
                    DetInner::Capacitance { base: corners.logdet, open }
                } else {
                    DetInner::Dense
                }
            }
            Err(_) => DetInner::Dense,
        };
        TwistedDeterminant { chain, e, inner }
    }

    /// `log det[E - H]` of the open chain.
    pub fn open_log_determinant(&self) -> Result<LogDet> {
        match &self.inner {
            DetInner::Capacitance { base, .. } => Ok(*base),
            DetInner::Dense => {
                let mut a = -self.chain.open_hamiltonian().into_matrix();
                for i in 0..a.nrows() {
                    a[(i, i)] += self.e;
                }
                logdet(&a).map_err(at_eigenvalue)
            }
        }
    }

    /// `log det[E - H(z)]`.
    pub fn eval(&self, z: Complex64) -> Result<LogDet> {
        if z == Complex64::ZERO {
            return Err(Error::ZeroTwist);
        }
        match &self.inner {
            DetInner::Capacitance { base, open } => {
                let cap = capacitance(open, z);
                Ok(base.mul(logdet(&cap)?))
            }
            DetInner::Dense => {
                let mut a = -self.chain.twisted_hamiltonian(z)?.into_matrix();
                for i in 0..a.nrows() {
                    a[(i, i)] += self.e;
                }
                logdet(&a)
            }
        }
    }
}
