//! Everything about `Q(E) = T(E)^dagger T(E)`: the doubled Hamiltonian whose
//! transfer matrix it is, the twisted and rotated variants, their duality
//! relations, the Thouless-type sum for the singular exponents, and the
//! QR-stabilized exponent extraction that works at any chain length.

use crate::chain::BlockChain;
use crate::duality::eps_circle_default;
use crate::error::{Error, Result};
use crate::numkernel::{
    general_eigenvalues, hermitian_eigenvalues, identity, logdet, BlockTridiag, LogDet,
};
use crate::parallel;
use crate::resolvent::corner_capacitance;
use crate::transfer::{
    coupling_factor, step_factor, transfer_product, transfer_product_stabilized,
};
use crate::duality::DualityResidual;
use crate::CMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Mutex;

/// Which doubled operator a matrix represents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DoubledKind {
    /// Open doubled Hamiltonian `K(E)`.
    Plain,
    /// Twisted `K(E, z)`.
    Twisted(Complex64),
    /// Rotated form `K'(E, z)` with the open Hamiltonian on the diagonal.
    Rotated(Complex64),
}

/// A `2NM x 2NM` doubled Hamiltonian.
#[derive(Debug, Clone)]
pub struct DoubledHamiltonian {
    kind: DoubledKind,
    energy: Complex64,
    mat: CMatrix,
}

impl DoubledHamiltonian {
    pub fn kind(&self) -> DoubledKind {
        self.kind
    }

    pub fn energy(&self) -> Complex64 {
        self.energy
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }
}

/// Block-tridiagonal data of `K(E)`: the original chain shifted by `-E`,
/// a `-I` junction, then the reversed chain reflected through `E^* - H`.
fn doubled_blocks(chain: &BlockChain, e: Complex64) -> (Vec<CMatrix>, Vec<CMatrix>, Vec<CMatrix>) {
    let n = chain.slices();
    let m = chain.block_size();
    let h = chain.diagonal_blocks();
    let l = chain.couplings();
    let mut diag = Vec::with_capacity(2 * n);
    for k in 0..n {
        let mut d = h[k].clone();
        for i in 0..m {
            d[(i, i)] -= e;
        }
        diag.push(d);
    }
    for j in 0..n {
        let mut d = -&h[n - 1 - j];
        for i in 0..m {
            d[(i, i)] += e.conj();
        }
        diag.push(d);
    }
    let mut upper = Vec::with_capacity(2 * n - 1);
    for item in l.iter().take(n - 1) {
        upper.push(item.clone());
    }
    upper.push(-identity(m));
    for k in n..(2 * n - 1) {
        upper.push(-l[2 * n - 2 - k].adjoint());
    }
    let lower: Vec<CMatrix> = upper.iter().map(CMatrix::adjoint).collect();
    (diag, upper, lower)
}

/// The doubled Hamiltonian `K(E)`; Hermitian for real `E`.
pub fn build_k(chain: &BlockChain, e: Complex64) -> DoubledHamiltonian {
    let (diag, upper, lower) = doubled_blocks(chain, e);
    let tri = BlockTridiag { diag: &diag, upper: &upper, lower: &lower };
    DoubledHamiltonian { kind: DoubledKind::Plain, energy: e, mat: tri.assemble() }
}

/// `K(E, z)`: the doubled Hamiltonian with corner twists `z^{-1} I` and `z I`.
pub fn build_k_twisted(chain: &BlockChain, e: Complex64, z: Complex64) -> Result<DoubledHamiltonian> {
    if z == Complex64::ZERO {
        return Err(Error::ZeroTwist);
    }
    let mut k = build_k(chain, e);
    let m = chain.block_size();
    let last = 2 * chain.slices() - 1;
    crate::numkernel::add_scaled_identity_block(&mut k.mat, 0, last, m, z.inv());
    crate::numkernel::add_scaled_identity_block(&mut k.mat, last, 0, m, z);
    k.kind = DoubledKind::Twisted(z);
    Ok(k)
}

/// Block-reversal permutation `P` with identity blocks on the antidiagonal.
pub fn reversal_permutation(n: usize, m: usize) -> CMatrix {
    let mut p = CMatrix::zeros(n * m, n * m);
    for b in 0..n {
        for i in 0..m {
            p[(b * m + i, (n - 1 - b) * m + i)] = Complex64::ONE;
        }
    }
    p
}

/// Left unitary of the rotation to `K'`: `(1/sqrt2) [[I, P], [-iI, iP]]`.
pub fn k_prime_left_unitary(n: usize, m: usize) -> CMatrix {
    let nm = n * m;
    let p = reversal_permutation(n, m);
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut w = CMatrix::zeros(2 * nm, 2 * nm);
    w.view_mut((0, 0), (nm, nm)).copy_from(&(identity(nm) * s));
    w.view_mut((0, nm), (nm, nm)).copy_from(&(&p * s));
    w.view_mut((nm, 0), (nm, nm)).copy_from(&(identity(nm) * (-Complex64::I * s)));
    w.view_mut((nm, nm), (nm, nm)).copy_from(&(&p * (Complex64::I * s)));
    w
}

/// Right unitary of the rotation: `(1/sqrt2) [[-I, iI], [P, iP]]`.
pub fn k_prime_right_unitary(n: usize, m: usize) -> CMatrix {
    let nm = n * m;
    let p = reversal_permutation(n, m);
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut w = CMatrix::zeros(2 * nm, 2 * nm);
    w.view_mut((0, 0), (nm, nm)).copy_from(&(identity(nm) * (-s)));
    w.view_mut((0, nm), (nm, nm)).copy_from(&(identity(nm) * (Complex64::I * s)));
    w.view_mut((nm, 0), (nm, nm)).copy_from(&(&p * s));
    w.view_mut((nm, nm), (nm, nm)).copy_from(&(&p * (Complex64::I * s)));
    w
}

/// The rotated doubled Hamiltonian `K'(E, z)`:
/// `[[H - Re E + U, -iV - Im E], [iV - Im E, -H + Re E + U]]` with
/// `U_11 = (z - 1/z)/2`, `V_11 = (z + 1/z)/2`, `V_NN = -I`.
///
/// Hermitian for real `z` at any complex `E`.
pub fn build_k_prime(chain: &BlockChain, e: Complex64, z: Complex64) -> Result<DoubledHamiltonian> {
    if z == Complex64::ZERO {
        return Err(Error::ZeroTwist);
    }
    let n = chain.slices();
    let m = chain.block_size();
    let nm = n * m;
    let h_open = chain.open_hamiltonian().into_matrix();
    let half = Complex64::new(0.5, 0.0);
    let u11 = (z - z.inv()) * half;
    let v11 = (z + z.inv()) * half;

    let mut tl = h_open.clone();
    let mut br = -h_open;
    for i in 0..nm {
        tl[(i, i)] -= Complex64::new(e.re, 0.0);
        br[(i, i)] += Complex64::new(e.re, 0.0);
    }
    for i in 0..m {
        tl[(i, i)] += u11;
        br[(i, i)] += u11;
    }
    let mut v = CMatrix::zeros(nm, nm);
    for i in 0..m {
        v[(i, i)] = v11;
        v[(nm - m + i, nm - m + i)] = -Complex64::ONE;
    }
    let im_e = Complex64::new(e.im, 0.0);
    let tr = &v * (-Complex64::I) - identity(nm) * im_e;
    let bl = &v * Complex64::I - identity(nm) * im_e;

    let mut mat = CMatrix::zeros(2 * nm, 2 * nm);
    mat.view_mut((0, 0), (nm, nm)).copy_from(&tl);
    mat.view_mut((0, nm), (nm, nm)).copy_from(&tr);
    mat.view_mut((nm, 0), (nm, nm)).copy_from(&bl);
    mat.view_mut((nm, nm), (nm, nm)).copy_from(&br);
    Ok(DoubledHamiltonian { kind: DoubledKind::Rotated(z), energy: e, mat })
}

/// Defect of the rotation identity: the displayed unitaries conjugate
/// `K(E, z)` onto the negative of the displayed block form (the dimension is
/// even, so determinants are unaffected); this returns
/// `||W_L K(E,z) W_R + K'(E,z)||`.
pub fn k_prime_conjugation_defect(chain: &BlockChain, e: Complex64, z: Complex64) -> Result<f64> {
    let n = chain.slices();
    let m = chain.block_size();
    let k = build_k_twisted(chain, e, z)?;
    let wl = k_prime_left_unitary(n, m);
    let wr = k_prime_right_unitary(n, m);
    let rotated = wl * k.matrix() * wr;
    let direct = build_k_prime(chain, e, z)?;
    Ok((rotated + direct.matrix()).norm())
}

/// `Q(E) = T(E)^dagger T(E)` from the plain product.
pub fn q_matrix(chain: &BlockChain, e: Complex64) -> Result<CMatrix> {
    let t = transfer_product(chain, e)?;
    Ok(t.matrix().adjoint() * t.matrix())
}

/// Defect of `Q(E^*) sigma_2 Q(E) = sigma_2`.
pub fn q_symplectic_defect(chain: &BlockChain, e: Complex64) -> Result<f64> {
    let q = q_matrix(chain, e)?;
    let q_conj = q_matrix(chain, e.conj())?;
    let sigma = crate::transfer::symplectic_form(chain.block_size());
    Ok((q_conj * &sigma * q - &sigma).norm())
}

/// `Q(E)` rebuilt as the transfer product of the doubled chain; structural
/// cross-oracle for the doubled Hamiltonian.
pub fn q_from_doubled_product(chain: &BlockChain, e: Complex64) -> Result<CMatrix> {
    let (diag, upper, _) = doubled_blocks(chain, e);
    let zero = Complex64::ZERO;
    let mut mat = step_factor(&diag[0], zero);
    for k in 1..diag.len() {
        let sigma = coupling_factor(&upper[k - 1])?;
        mat = step_factor(&diag[k], zero) * (sigma * mat);
    }
    Ok(mat)
}

/// Prepared evaluator for `log det K(E, z)` as a function of `z`: one corner
/// sweep of `K(E)`, then a `2M x 2M` capacitance determinant per call.
pub struct DoubledDeterminant<'a> {
    chain: &'a BlockChain,
    e: Complex64,
    inner: DoubledInner,
}

enum DoubledInner {
    Capacitance { base: LogDet, k11: CMatrix, k1n: CMatrix, kn1: CMatrix, knn: CMatrix },
    Dense,
}

impl<'a> DoubledDeterminant<'a> {
    pub fn prepare(chain: &'a BlockChain, e: Complex64) -> Self {
        let (diag, upper, lower) = doubled_blocks(chain, e);
        let tri = BlockTridiag { diag: &diag, upper: &upper, lower: &lower };
        let inner = match tri.inverse_corners() {
            Ok(c) => {
                let healthy = [&c.c11, &c.c1n, &c.cn1, &c.cnn].iter().all(|b| b.norm() < 1e8);
                if healthy {
                    DoubledInner::Capacitance {
                        base: c.logdet,
                        k11: c.c11,
                        k1n: c.c1n,
                        kn1: c.cn1,
                        knn: c.cnn,
                    }
                } else {
                    DoubledInner::Dense
                }
            }
            Err(_) => DoubledInner::Dense,
        };
        DoubledDeterminant { chain, e, inner }
    }

    pub fn eval(&self, z: Complex64) -> Result<LogDet> {
        if z == Complex64::ZERO {
            return Err(Error::ZeroTwist);
        }
        match &self.inner {
            DoubledInner::Capacitance { base, k11, k1n, kn1, knn } => {
                let cap = corner_capacitance(k11, k1n, kn1, knn, z);
                Ok(base.mul(logdet(&cap)?))
            }
            DoubledInner::Dense => {
                let k = build_k_twisted(self.chain, self.e, z)?;
                logdet(k.matrix())
            }
        }
    }
}

/// Residuals of the doubled duality through `K(E,z)` and through `K'(E,z)`.
#[derive(Debug, Clone, Copy)]
pub struct QDualityResiduals {
    pub plain: DualityResidual,
    pub rotated: DualityResidual,
}

/// `log det[T^dagger T - z]` against
/// `(-1)^{NM} (-z)^M |det(L...)|^{-2} det K(E, z)`, and the same through
/// the rotated form.
pub fn q_duality_residual(chain: &BlockChain, e: Complex64, z: Complex64) -> Result<QDualityResiduals> {
    if z == Complex64::ZERO {
        return Err(Error::ZeroTwist);
    }
    let n = chain.slices();
    let m = chain.block_size();
    let q = q_matrix(chain, e)?;
    let lhs = logdet(&(q - identity(2 * m) * z))?;
    let couplings = chain.coupling_log_determinant()?;
    let prefactor = LogDet { log_mag: -2.0 * couplings.log_mag, phase: ((n * m) as f64) * PI }
        .mul(LogDet::from_complex(-z).powi(m as i32));
    let det_k = DoubledDeterminant::prepare(chain, e).eval(z)?;
    let det_kp = logdet(build_k_prime(chain, e, z)?.matrix())?;
    let plain = duality_pair(lhs, prefactor.mul(det_k));
    let rotated = duality_pair(lhs, prefactor.mul(det_kp));
    Ok(QDualityResiduals { plain, rotated })
}

fn duality_pair(lhs: LogDet, rhs: LogDet) -> DualityResidual {
    DualityResidual {
        lhs,
        rhs,
        mag_err: lhs.mag_distance(rhs),
        phase_err: lhs.phase_distance(rhs),
    }
}

/// Number of unit eigenvalue pairs of `Q(E)` (`2 mu` eigenvalues within the
/// scaled width of 1).
pub fn unit_q_count(chain: &BlockChain, e: f64) -> Result<usize> {
    let q = q_matrix(chain, Complex64::new(e, 0.0))?;
    let eps = eps_circle_default(chain);
    let vals = hermitian_eigenvalues(&q)?;
    let on_unit = vals.iter().filter(|&&q| (q - 1.0).abs() <= eps).count();
    Ok(on_unit / 2)
}

/// Thouless-type sum for the singular exponents:
/// `sum_a lambda_a = -2 sum_k log|det L_k|
///                   + (1/2pi) int log[(-1)^{NM} det K(E, e^{i phi})] dphi`.
///
/// The integrand must be positive; its phase is asserted at every node and a
/// violation is an error, not a warning. The `2 mu` unit eigenvalues of `Q`
/// put a log zero of that order at `phi = 0`, which is subtracted exactly.
pub fn q_thouless_sum(chain: &BlockChain, e: f64, quad_tol: f64) -> Result<crate::duality::ThoulessCheck> {
    let ec = Complex64::new(e, 0.0);
    let n = chain.slices();
    let m = chain.block_size();
    // eigenvalues of Q through the singular values of T: forming T^dagger T
    // explicitly squares the conditioning and loses the subdominant
    // exponents long before the product itself does
    let log_sv = stabilized_log_singular_values(chain, ec)?;
    let eps = eps_circle_default(chain);
    let eps_ln = (1.0 + eps).ln();
    let lambdas: Vec<f64> =
        log_sv.iter().filter(|&&s| 2.0 * s > eps_ln).map(|&s| 2.0 * s).collect();
    let lhs = parallel::pairwise_sum(&lambdas);
    let mu = log_sv.iter().filter(|&&s| (2.0 * s).abs() <= eps_ln).count() / 2;

    let det = DoubledDeterminant::prepare(chain, ec);
    let nm_pi = ((n * m) as f64) * PI;
    let violation: Mutex<Option<(f64, f64)>> = Mutex::new(None);
    let singular_phases = vec![0.0_f64; 2 * mu];
    let quad = crate::duality::singular_aware_quadrature(
        |phi| {
            let ld = det.eval(Complex64::from_polar(1.0, phi))?;
            let defect = crate::numkernel::wrap_angle(ld.phase - nm_pi).abs();
            if defect > 1e-3 {
                let mut slot = violation.lock().unwrap();
                slot.get_or_insert((phi, defect));
            }
            Ok(ld.log_mag)
        },
        &singular_phases,
        e,
        chain,
        quad_tol,
    )?;
    if let Some((phi, defect)) = *violation.lock().unwrap() {
        return Err(Error::PositivityViolation { phi, defect });
    }
    let rhs = -2.0 * chain.coupling_log_determinant()?.log_mag + quad.value;
    Ok(crate::duality::ThoulessCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        converged: quad.converged,
        nodes: quad.nodes,
    })
}

/// All `2M` log-singular values of `T(E)` from the QR-stabilized product:
/// scale ledger plus a final small SVD, descending.
fn stabilized_log_singular_values(chain: &BlockChain, e: Complex64) -> Result<Vec<f64>> {
    let t = transfer_product_stabilized(chain, e)?;
    let svd = t.matrix().clone().svd(false, false);
    let mut logs: Vec<f64> = svd
        .singular_values
        .iter()
        .map(|&s| t.scale() + s.ln())
        .collect();
    logs.sort_by(|a, b| b.total_cmp(a));
    Ok(logs)
}

/// The `M` largest log-singular values of `T(E)` from the QR-stabilized
/// product: scale ledger plus a final small SVD. Works at any `N`; matches
/// `log sqrt(eig(T^dagger T))` wherever the latter is accurately computable.
pub fn singular_exponents(chain: &BlockChain, e: Complex64) -> Result<Vec<f64>> {
    let mut logs = stabilized_log_singular_values(chain, e)?;
    logs.truncate(chain.block_size());
    Ok(logs)
}

/// Pointwise modulus form of the doubled duality at real `E`,
/// `z = e^{i phi}`: the classified spectrum of `Q` against
/// `(-1)^{NM} det K(E, e^{i phi}) / |det(L...)|^2`, compared in log form.
pub fn q_modulus_identity_defect(chain: &BlockChain, e: f64, phi: f64) -> Result<f64> {
    let ec = Complex64::new(e, 0.0);
    let log_sv = stabilized_log_singular_values(chain, ec)?;
    let eps_ln = (1.0 + eps_circle_default(chain)).ln();
    let mut lhs = 0.0_f64;
    for &s in &log_sv {
        let lambda = 2.0 * s;
        if lambda > eps_ln {
            // ln(2 cosh l - 2 cos phi), overflow-safe for large l
            lhs += if lambda > 40.0 {
                lambda + ((-2.0 * lambda).exp() - 2.0 * (-lambda).exp() * phi.cos()).ln_1p()
            } else {
                (2.0 * lambda.cosh() - 2.0 * phi.cos()).ln()
            };
        } else if lambda.abs() <= eps_ln {
            lhs += (2.0 * (phi / 2.0).sin().abs()).ln();
        }
        // the reciprocal partners (lambda < 0) are counted through their pair
    }
    let det = DoubledDeterminant::prepare(chain, ec);
    let ld = det.eval(Complex64::from_polar(1.0, phi))?;
    let rhs = ld.log_mag - 2.0 * chain.coupling_log_determinant()?.log_mag;
    Ok((lhs - rhs).abs())
}

/// Eigenvalues of `K(E, z)`, for the spectral-structure checks.
pub fn doubled_spectrum(chain: &BlockChain, e: Complex64, z: Complex64) -> Result<Vec<Complex64>> {
    let k = build_k_twisted(chain, e, z)?;
    general_eigenvalues(k.matrix())
}

/// Worst unmatched distance of the `(x, -x^*)` pairing of `spec K(E, z)`
/// at real `z`.
pub fn doubled_pairing_defect(chain: &BlockChain, e: Complex64, z: f64) -> Result<f64> {
    let spec = doubled_spectrum(chain, e, Complex64::new(z, 0.0))?;
    let scale = spec.iter().map(|x| x.norm()).fold(1.0_f64, f64::max);
    let mut worst = 0.0_f64;
    for x in &spec {
        let mirror = -x.conj();
        let dist = spec.iter().map(|y| (y - mirror).norm()).fold(f64::INFINITY, f64::min);
        worst = worst.max(dist / scale);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::Ensemble;
    use crate::cplx;
    use crate::duality::spectral_report;

    fn free_chain(n: usize) -> BlockChain {
        let h = vec![CMatrix::zeros(1, 1); n];
        let l = vec![CMatrix::identity(1, 1); n - 1];
        BlockChain::new(h, l).unwrap()
    }

    #[test]
    fn doubled_matrix_free_two_site() {
        let k = build_k(&free_chain(2), cplx(0.0, 0.0));
        let expect = CMatrix::from_row_slice(
            4,
            4,
            &[
                cplx(0.0, 0.0), cplx(1.0, 0.0), cplx(0.0, 0.0), cplx(0.0, 0.0),
                cplx(1.0, 0.0), cplx(0.0, 0.0), cplx(-1.0, 0.0), cplx(0.0, 0.0),
                cplx(0.0, 0.0), cplx(-1.0, 0.0), cplx(0.0, 0.0), cplx(-1.0, 0.0),
                cplx(0.0, 0.0), cplx(0.0, 0.0), cplx(-1.0, 0.0), cplx(0.0, 0.0),
            ],
        );
        assert_eq!((k.matrix() - expect).norm(), 0.0);
    }

    #[test]
    fn doubled_matrix_hermitian_at_real_energy() {
        let chain = BlockChain::band_random(2, 4, Ensemble::Gue, 40).unwrap();
        let k = build_k(&chain, cplx(0.7, 0.0));
        assert!(crate::numkernel::hermitian_defect(k.matrix()) < 1e-12);
        let kt = build_k_twisted(&chain, cplx(0.7, 0.0), Complex64::ONE).unwrap();
        assert!(crate::numkernel::hermitian_defect(kt.matrix()) < 1e-12);
    }

    #[test]
    fn doubled_transfer_product_is_q() {
        for seed in [1_u64, 2, 3] {
            let chain = BlockChain::band_random(2, 4, Ensemble::Gue, seed).unwrap();
            let e = cplx(0.3, 0.15);
            let q = q_matrix(&chain, e).unwrap();
            let q2 = q_from_doubled_product(&chain, e).unwrap();
            assert!(
                (&q - &q2).norm() < 1e-8 * q.norm().max(1.0),
                "seed {seed}: {}",
                (&q - &q2).norm()
            );
        }
    }

    #[test]
    fn q_of_unitary_transfer_is_identity() {
        // free N = 3 at E = 0: T is a rotation, Q = I
        let q = q_matrix(&free_chain(3), cplx(0.0, 0.0)).unwrap();
        assert!((q - identity(2)).norm() < 1e-12);
    }

    /// Exact largest singular value of the free-chain transfer matrix at
    /// real energy, via the three-term recurrence p_{k+1} = E p_k - p_{k-1}:
    /// T_N = [[p_N, -p_{N-1}], [p_{N-1}, -p_{N-2}]], det T = 1, so
    /// sigma_1^2 = (F + sqrt(F^2 - 4)) / 2 with F = ||T||_F^2.
    fn free_chain_sigma1_squared(n: usize, e: f64) -> f64 {
        let (mut prev, mut cur) = (1.0_f64, e); // p_0, p_1
        let mut older = 0.0; // p_{-1}
        for _ in 1..n {
            let next = e * cur - prev;
            older = prev;
            prev = cur;
            cur = next;
        }
        let f = cur * cur + 2.0 * prev * prev + older * older;
        (f + (f * f - 4.0).sqrt()) / 2.0
    }

    #[test]
    fn q_eigenvalues_outside_band() {
        // recurrence oracle for the singular values of the free chain; the
        // eigenvalue magnitude t^N bounds them but differs by an O(1)
        // eigenvector-angle factor at finite N
        let n = 4;
        let q = q_matrix(&free_chain(n), cplx(3.0, 0.0)).unwrap();
        let vals = hermitian_eigenvalues(&q).unwrap();
        let big = free_chain_sigma1_squared(n, 3.0);
        assert!((vals[1] - big).abs() < 1e-10 * big, "{} vs {big}", vals[1]);
        assert!((vals[0] - 1.0 / big).abs() < 1e-10, "{} vs {}", vals[0], 1.0 / big);
        let t = (3.0 + 5.0_f64.sqrt()) / 2.0;
        assert!(big > t.powi(2 * n as i32), "sigma_1 bounds the eigenvalue growth");
    }

    #[test]
    fn q_pairs_at_real_energy() {
        // reciprocal pairs on the log scale; the achievable accuracy of a
        // small eigenvalue of Q is eps * ||Q|| / q, so the bar scales with it
        let chain = BlockChain::band_random(2, 5, Ensemble::Gue, 51).unwrap();
        let q = q_matrix(&chain, cplx(0.4, 0.0)).unwrap();
        let vals = hermitian_eigenvalues(&q).unwrap();
        let scale = q.norm();
        let n = vals.len();
        for i in 0..n {
            let (lo, hi) = (vals[i], vals[n - 1 - i]);
            assert!(lo > 0.0, "Q must be positive");
            let tol = 1e-13 * (scale / lo.min(hi)).max(1.0);
            let defect = (lo.ln() + hi.ln()).abs();
            assert!(defect < tol, "pair ({lo}, {hi}): log defect {defect} > {tol}");
        }
    }

    #[test]
    fn q_symplectic_property() {
        let chain = BlockChain::band_random(2, 4, Ensemble::Gue, 52).unwrap();
        for e in [cplx(0.5, 0.0), cplx(0.2, 0.6), cplx(-1.1, -0.3)] {
            let q = q_matrix(&chain, e).unwrap();
            let d = q_symplectic_defect(&chain, e).unwrap();
            assert!(d < 1e-8 * q.norm().max(1.0).powi(2), "defect {d} at {e}");
        }
    }

    #[test]
    fn doubled_adjoint_property() {
        // K(E,z)^dagger = K(E*, 1/z*)
        let chain = BlockChain::band_random(2, 3, Ensemble::Gue, 53).unwrap();
        let e = cplx(0.4, 0.22);
        let z = cplx(0.8, -0.6);
        let a = build_k_twisted(&chain, e, z).unwrap();
        let b = build_k_twisted(&chain, e.conj(), z.conj().inv()).unwrap();
        assert!((a.matrix().adjoint() - b.matrix()).norm() < 1e-12);
    }

    #[test]
    fn doubled_reversal_conjugation() {
        // [[0,P],[-P,0]] K(E,z) [[0,-P],[P,0]] = -K(E*, 1/z)
        let chain = BlockChain::band_random(2, 3, Ensemble::Gue, 54).unwrap();
        let n = chain.slices();
        let m = chain.block_size();
        let nm = n * m;
        let e = cplx(-0.3, 0.41);
        let z = cplx(1.2, 0.5);
        let p = reversal_permutation(n, m);
        let mut pi = CMatrix::zeros(2 * nm, 2 * nm);
        pi.view_mut((0, nm), (nm, nm)).copy_from(&p);
        pi.view_mut((nm, 0), (nm, nm)).copy_from(&(-&p));
        let mut pi_inv = CMatrix::zeros(2 * nm, 2 * nm);
        pi_inv.view_mut((0, nm), (nm, nm)).copy_from(&(-&p));
        pi_inv.view_mut((nm, 0), (nm, nm)).copy_from(&p);
        let k = build_k_twisted(&chain, e, z).unwrap();
        let lhs = &pi * k.matrix() * &pi_inv;
        let rhs = build_k_twisted(&chain, e.conj(), z.inv()).unwrap();
        assert!((lhs + rhs.matrix()).norm() < 1e-12);
    }

    #[test]
    fn doubled_spectrum_pairs_at_real_twist() {
        let chain = BlockChain::band_random(1, 4, Ensemble::Goe, 55).unwrap();
        let defect = doubled_pairing_defect(&chain, cplx(0.3, 0.0), -2.0).unwrap();
        assert!(defect < 1e-7, "pairing defect {defect}");
    }

    #[test]
    fn doubled_no_zero_mode_off_positive_axis() {
        // z = -1: the spectrum must exclude zero
        for seed in [3_u64, 7, 11] {
            let chain = BlockChain::band_random(2, 3, Ensemble::Gue, seed).unwrap();
            let spec = doubled_spectrum(&chain, cplx(0.25, 0.0), cplx(-1.0, 0.0)).unwrap();
            let min_mag = spec.iter().map(|x| x.norm()).fold(f64::INFINITY, f64::min);
            assert!(min_mag > 1e-8, "zero mode at seed {seed}: {min_mag}");
        }
    }

    #[test]
    fn doubled_balanced_signature_on_circle() {
        // K(E, e^{i phi}) has as many positive as negative eigenvalues
        let chain = BlockChain::anderson_strip(2, 4, 0.9, 8).unwrap();
        for phi in [0.4, 1.7, 2.9] {
            let k = build_k_twisted(&chain, cplx(0.2, 0.0), Complex64::from_polar(1.0, phi))
                .unwrap();
            let vals = hermitian_eigenvalues(k.matrix()).unwrap();
            let pos = vals.iter().filter(|&&v| v > 0.0).count();
            assert_eq!(pos * 2, vals.len(), "signature unbalanced at phi={phi}");
        }
    }

    #[test]
    fn rotated_form_matches_conjugation_up_to_sign() {
        let chain = BlockChain::band_random(2, 3, Ensemble::Gue, 57).unwrap();
        let d = k_prime_conjugation_defect(&chain, cplx(0.3, 0.7), cplx(1.7, 0.0)).unwrap();
        assert!(d < 1e-12, "conjugation defect {d}");
        // and the unitaries are unitary
        let wl = k_prime_left_unitary(3, 2);
        let wr = k_prime_right_unitary(3, 2);
        assert!((&wl * wl.adjoint() - identity(12)).norm() < 1e-12);
        assert!((wr.adjoint() * &wr - identity(12)).norm() < 1e-12);
    }

    #[test]
    fn rotated_form_hermitian_for_real_twist() {
        let chain = BlockChain::band_random(2, 3, Ensemble::Gue, 58).unwrap();
        let kp = build_k_prime(&chain, cplx(0.4, 0.9), cplx(-1.4, 0.0)).unwrap();
        assert!(crate::numkernel::hermitian_defect(kp.matrix()) < 1e-12);
    }

    #[test]
    fn rotated_adjoint_and_sign_conjugations() {
        let chain = BlockChain::band_random(1, 3, Ensemble::Gue, 59).unwrap();
        let e = cplx(0.3, -0.5);
        let z = cplx(0.9, 0.4);
        // a) K'(E,z)^dagger = K'(E, z*)
        let a = build_k_prime(&chain, e, z).unwrap();
        let b = build_k_prime(&chain, e, z.conj()).unwrap();
        assert!((a.matrix().adjoint() - b.matrix()).norm() < 1e-12);
        // b) [[0,I],[I,0]] K'(E,z) [[0,I],[I,0]] = -K'(E*, 1/z)
        let nm = chain.slices() * chain.block_size();
        let mut swap = CMatrix::zeros(2 * nm, 2 * nm);
        for i in 0..nm {
            swap[(i, nm + i)] = Complex64::ONE;
            swap[(nm + i, i)] = Complex64::ONE;
        }
        let lhs = &swap * a.matrix() * &swap;
        let rhs = build_k_prime(&chain, e.conj(), z.inv()).unwrap();
        assert!((lhs + rhs.matrix()).norm() < 1e-12);
        // the diag(I,-I) conjugation maps onto K'(E*, -1/z) only up to the
        // z-independent junction block of V, which flips sign; the defect is
        // exactly that corner
        let mut sign = identity(2 * nm);
        for i in nm..2 * nm {
            sign[(i, i)] = -Complex64::ONE;
        }
        let lhs = &sign * a.matrix() * &sign;
        let rhs = build_k_prime(&chain, e.conj(), -z.inv()).unwrap();
        let delta = lhs - rhs.matrix();
        let m = chain.block_size();
        let mut expected = CMatrix::zeros(2 * nm, 2 * nm);
        for i in 0..m {
            expected[(nm - m + i, 2 * nm - m + i)] = -Complex64::new(0.0, 2.0);
            expected[(2 * nm - m + i, nm - m + i)] = Complex64::new(0.0, 2.0);
        }
        assert!((delta - expected).norm() < 1e-12, "unexpected conjugation defect");
    }

    #[test]
    fn q_duality_free_three_site() {
        // Q = I: det(Q - z) = (1 - z)^2, cross-checked through K(0, z)
        let chain = free_chain(3);
        for z in [cplx(2.0, 0.0), cplx(0.3, 0.7), cplx(-1.1, 0.2)] {
            let r = q_duality_residual(&chain, cplx(0.0, 0.0), z).unwrap();
            let closed = (Complex64::ONE - z) * (Complex64::ONE - z);
            assert!(r.plain.lhs.mag_distance(LogDet::from_complex(closed)) < 1e-10);
            assert!(r.plain.mag_err < 1e-9 && r.plain.phase_err < 1e-9, "plain at z={z}");
            assert!(r.rotated.mag_err < 1e-9 && r.rotated.phase_err < 1e-9, "rotated at z={z}");
        }
    }

    #[test]
    fn q_duality_random_sweep() {
        let chain = BlockChain::band_random(2, 4, Ensemble::Gue, 60).unwrap();
        let e = cplx(0.35, 0.0);
        for k in 0..20 {
            let z = Complex64::from_polar(0.4 + 0.1 * k as f64, 0.37 * k as f64 + 0.2);
            let r = q_duality_residual(&chain, e, z).unwrap();
            assert!(r.plain.mag_err <= 1e-8, "plain mag {} at z={z}", r.plain.mag_err);
            assert!(r.plain.phase_err <= 1e-8, "plain phase at z={z}");
            assert!(r.rotated.mag_err <= 1e-8, "rotated mag at z={z}");
            assert!(r.rotated.phase_err <= 1e-8, "rotated phase at z={z}");
        }
        // real negative z stays finite: no zero modes there
        let r = q_duality_residual(&chain, e, cplx(-0.8, 0.0)).unwrap();
        assert!(r.plain.mag_err <= 1e-8 && r.rotated.mag_err <= 1e-8);
    }

    #[test]
    fn q_thouless_free_chain_in_band() {
        let check = q_thouless_sum(&free_chain(3), 0.0, 1e-9).unwrap();
        assert!(check.lhs.abs() < 1e-12);
        assert!(check.rhs.abs() < 1e-7, "rhs {}", check.rhs);
    }

    #[test]
    fn q_thouless_free_chain_outside_band() {
        // lhs = rhs = log sigma_1^2 exactly (recurrence oracle); the naive
        // 2 N arccosh(3/2) is only the rate, off by an O(1) constant
        let n = 8;
        let check = q_thouless_sum(&free_chain(n), 3.0, 1e-10).unwrap();
        let exact = free_chain_sigma1_squared(n, 3.0).ln();
        assert!((check.lhs - exact).abs() < 1e-8 * exact, "lhs {} vs {exact}", check.lhs);
        assert!((check.rhs - exact).abs() < 1e-7 * exact, "rhs {} vs {exact}", check.rhs);
        assert!(check.residual < 1e-6 * exact);
        let rate = check.lhs / (2.0 * n as f64);
        assert!((rate - (1.5_f64).acosh()).abs() < 0.05, "rate {rate}");
    }

    #[test]
    fn q_thouless_disordered() {
        let chain = BlockChain::anderson_strip(2, 8, 1.0, 61).unwrap();
        let check = q_thouless_sum(&chain, 0.2, 1e-9).unwrap();
        assert!(check.residual <= 1e-6, "residual {}", check.residual);
    }

    #[test]
    fn q_modulus_identity_at_nodes() {
        let chain = BlockChain::anderson_strip(2, 5, 0.7, 4).unwrap();
        for e in [0.15_f64, 1.3] {
            for phi in [0.37, 1.9, 3.4, 5.5] {
                let defect = q_modulus_identity_defect(&chain, e, phi).unwrap();
                assert!(defect < 1e-7, "E={e} phi={phi}: {defect}");
            }
        }
        // unitary point: Q = I, all factors are the sine form
        let defect = q_modulus_identity_defect(&free_chain(3), 0.0, 1.1).unwrap();
        assert!(defect < 1e-10, "free-chain defect {defect}");
    }

    #[test]
    fn unit_q_count_is_exact_only_at_normal_points() {
        // mu counts exact unit singular values; unit-circle eigenvalues of a
        // nonnormal T do not produce them, so mu = nu only where T is normal
        // (the free chain at band center, where T is a rotation). On a
        // disordered chain inside a band, mu = 0 while nu > 0.
        let free = free_chain(3);
        assert_eq!(unit_q_count(&free, 0.0).unwrap(), 1);
        assert_eq!(spectral_report(&free, 0.0, None).unwrap().nu, 1);
        assert_eq!(unit_q_count(&free, 3.0).unwrap(), 0);

        let chain = BlockChain::anderson_strip(2, 6, 0.8, 21).unwrap();
        let mu = unit_q_count(&chain, 0.1).unwrap();
        let nu = spectral_report(&chain, 0.1, None).unwrap().nu;
        assert_eq!(mu, 0, "nonnormal T has no exact unit singular values");
        assert!(nu > 0, "E = 0.1 lies inside a band");
    }

    #[test]
    fn exponents_free_chain_closed_form() {
        // exact via the recurrence oracle; the eigenvalue rate
        //N arccosh(3/2) is approached with an O(1) additive offset
        let n = 12;
        let exps = singular_exponents(&free_chain(n), cplx(3.0, 0.0)).unwrap();
        assert_eq!(exps.len(), 1);
        let exact = 0.5 * free_chain_sigma1_squared(n, 3.0).ln();
        assert!((exps[0] - exact).abs() < 1e-8 * exact, "{} vs {exact}", exps[0]);
        let rate = exps[0] / n as f64;
        assert!((rate - (1.5_f64).acosh()).abs() < 0.05, "rate {rate}");
    }

    #[test]
    fn exponents_match_q_spectrum() {
        // chain with a mild exponent spread, so eig(T^dagger T) is itself
        // accurate enough to serve as the oracle
        let chain = BlockChain::anderson_strip(2, 16, 1.0, 62).unwrap();
        let e = cplx(0.3, 0.0);
        let exps = singular_exponents(&chain, e).unwrap();
        let q = q_matrix(&chain, e).unwrap();
        let q_vals = hermitian_eigenvalues(&q).unwrap();
        // largest M eigenvalues of Q are e^{2 lambda}
        for (k, lam) in exps.iter().enumerate() {
            let from_q = 0.5 * q_vals[q_vals.len() - 1 - k].ln();
            assert!(
                (lam - from_q).abs() < 1e-6 * from_q.abs().max(1.0),
                "exponent {k}: {lam} vs {from_q}"
            );
        }
    }

    #[test]
    fn exponents_survive_huge_chains() {
        let chain = BlockChain::anderson_strip(1, 10_000, 2.0, 63).unwrap();
        let exps = singular_exponents(&chain, cplx(0.0, 0.0)).unwrap();
        assert_eq!(exps.len(), 1);
        assert!(exps[0].is_finite() && exps[0] > 0.0, "exponent {}", exps[0]);
    }
}
