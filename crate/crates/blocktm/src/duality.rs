//! The determinant duality between `T(E)` and the twisted Hamiltonian
//! family, the band structure of `H(e^{i phi})`, the spectral partition of
//! `T(E)`, and the Thouless-type sum rule for its exponents.

use crate::chain::BlockChain;
use crate::error::{Error, Result};
use crate::numkernel::{
    hermitian_eigenvalues, identity, logdet, periodic_quadrature, wrap_angle, LogDet,
    QuadratureResult, DEFAULT_MAX_NODES,
};
use crate::parallel;
use crate::resolvent::TwistedDeterminant;
use crate::transfer::{inverse_transfer_product, transfer_product, TransferMatrix};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Default unit-circle classification width; grows with the product length
/// because eigenvalue conditioning degrades with it.
pub fn eps_circle_default(chain: &BlockChain) -> f64 {
    1e-8 * (2 * chain.block_size() * chain.slices()) as f64
}

/// Both sides of a determinant identity in log form, with their magnitude
/// and phase disagreements.
#[derive(Debug, Clone, Copy)]
pub struct DualityResidual {
    pub lhs: LogDet,
    pub rhs: LogDet,
    pub mag_err: f64,
    pub phase_err: f64,
}

impl DualityResidual {
    fn new(lhs: LogDet, rhs: LogDet) -> Self {
        DualityResidual {
            lhs,
            rhs,
            mag_err: lhs.mag_distance(rhs),
            phase_err: lhs.phase_distance(rhs),
        }
    }
}

/// `log det[T(E) - z]` against
/// `M log(-z) - sum_k log det L_k + log det[E - H(z)]`.
pub fn duality_residual(chain: &BlockChain, e: Complex64, z: Complex64) -> Result<DualityResidual> {
    let t = transfer_product(chain, e)?;
    let det = TwistedDeterminant::prepare(chain, e);
    duality_residual_prepared(chain, &t, &det, z)
}

/// Same with a prebuilt transfer matrix and determinant evaluator, for grid
/// scans that share them across many `z`.
pub fn duality_residual_prepared(
    chain: &BlockChain,
    t: &TransferMatrix,
    det: &TwistedDeterminant,
    z: Complex64,
) -> Result<DualityResidual> {
    if z == Complex64::ZERO {
        return Err(Error::ZeroTwist);
    }
    let m = chain.block_size();
    let lhs = logdet(&(t.matrix() - identity(2 * m) * z))?;
    let rhs = LogDet::from_complex(-z)
        .powi(m as i32)
        .div(chain.coupling_log_determinant()?)
        .mul(det.eval(z)?);
    Ok(DualityResidual::new(lhs, rhs))
}

/// `log det[T(E)^{-1} - z]` against
/// `M log(-z) - sum_k log det L_k^dagger + log det[E - H(1/z)]`.
pub fn inverse_duality_residual(
    chain: &BlockChain,
    e: Complex64,
    z: Complex64,
) -> Result<DualityResidual> {
    if z == Complex64::ZERO {
        return Err(Error::ZeroTwist);
    }
    let m = chain.block_size();
    let t_inv = inverse_transfer_product(chain, e)?;
    let lhs = logdet(&(t_inv.matrix() - identity(2 * m) * z))?;
    let det = TwistedDeterminant::prepare(chain, e);
    let rhs = LogDet::from_complex(-z)
        .powi(m as i32)
        .div(chain.coupling_log_determinant()?.conj())
        .mul(det.eval(z.inv())?);
    Ok(DualityResidual::new(lhs, rhs))
}

/// `log det[T + T^{-1} - (z + 1/z)]` against
/// `-2 sum_k log |det L_k| + log det[E - H(z)] + log det[E - H(1/z)]`.
pub fn symmetric_duality_residual(
    chain: &BlockChain,
    e: Complex64,
    z: Complex64,
) -> Result<DualityResidual> {
    if z == Complex64::ZERO {
        return Err(Error::ZeroTwist);
    }
    let m = chain.block_size();
    let t = transfer_product(chain, e)?;
    let t_inv = inverse_transfer_product(chain, e)?;
    let shift = z + z.inv();
    let lhs = logdet(&(t.matrix() + t_inv.matrix() - identity(2 * m) * shift))?;
    let det = TwistedDeterminant::prepare(chain, e);
    let couplings = chain.coupling_log_determinant()?;
    let rhs = LogDet { log_mag: -2.0 * couplings.log_mag, phase: 0.0 }
        .mul(det.eval(z)?)
        .mul(det.eval(z.inv())?);
    Ok(DualityResidual::new(lhs, rhs))
}

/// Eigenvalue tracks of the Hermitian family `H(e^{i phi})` over one period.
#[derive(Debug, Clone)]
pub struct BandStructure {
    /// Uniform grid on `[0, 2pi)`, always containing 0 and pi.
    pub phi_grid: Vec<f64>,
    /// `levels[k][j]` is track `k` (ascending per node) at node `j`.
    pub levels: Vec<Vec<f64>>,
    /// Per-track `(min, max)` over the grid.
    pub bands: Vec<(f64, f64)>,
}

impl BandStructure {
    /// Number of bands whose interval contains `e`.
    pub fn bands_containing(&self, e: f64) -> usize {
        self.bands.iter().filter(|(lo, hi)| *lo <= e && e <= *hi).count()
    }

    /// Number of level-crossing pairs at energy `e`: half the count of grid
    /// cells where the number of eigenvalues below `e` changes.
    ///
    /// This is the band-intersection count in a form that is robust against
    /// the sharp interior extrema the sorted tracks develop at avoided
    /// crossings, where interval endpoints are badly grid-limited.
    pub fn circle_pair_count(&self, e: f64) -> usize {
        let nodes = self.phi_grid.len();
        let below = |j: usize| -> usize {
            self.levels.iter().filter(|track| track[j] < e).count()
        };
        let mut crossings = 0usize;
        for j in 0..nodes {
            let next = (j + 1) % nodes;
            crossings += below(j).abs_diff(below(next));
        }
        crossings / 2
    }

    /// Largest jump between adjacent nodes over all tracks; a refinement
    /// check for track continuity.
    pub fn max_track_jump(&self) -> f64 {
        let mut worst = 0.0_f64;
        for track in &self.levels {
            for w in track.windows(2) {
                worst = worst.max((w[1] - w[0]).abs());
            }
            // periodic wrap
            if let (Some(first), Some(last)) = (track.first(), track.last()) {
                worst = worst.max((first - last).abs());
            }
        }
        worst
    }

    /// How far band extrema deviate from the values at `phi = 0, pi`.
    ///
    /// Band edges are expected at the symmetric points; this verifies rather
    /// than assumes it, and is reported so violations stay visible.
    pub fn symmetric_point_defect(&self) -> f64 {
        let nodes = self.phi_grid.len();
        let j_pi = nodes / 2;
        let mut worst = 0.0_f64;
        for (k, (lo, hi)) in self.bands.iter().enumerate() {
            let at0 = self.levels[k][0];
            let atpi = self.levels[k][j_pi];
            worst = worst.max((lo - at0.min(atpi)).abs());
            worst = worst.max((hi - at0.max(atpi)).abs());
        }
        worst
    }
}

/// Hermitian eigensolves of `H(e^{i phi})` on a uniform grid.
///
/// Odd node counts are rounded up so that `phi = pi` is a grid point.
pub fn band_structure(chain: &BlockChain, phi_nodes: usize) -> Result<BandStructure> {
    let nodes = phi_nodes.max(8).next_multiple_of(2);
    let phi_grid: Vec<f64> = (0..nodes).map(|j| 2.0 * PI * j as f64 / nodes as f64).collect();
    let per_node: Vec<Result<Vec<f64>>> = parallel::map_slice(&phi_grid, |&phi| {
        let z = Complex64::from_polar(1.0, phi);
        let h = chain.twisted_hamiltonian(z)?;
        hermitian_eigenvalues(h.matrix())
    });
    let mut columns = Vec::with_capacity(nodes);
    for r in per_node {
        columns.push(r?);
    }
    let tracks = columns[0].len();
    let levels: Vec<Vec<f64>> = (0..tracks)
        .map(|k| columns.iter().map(|col| col[k]).collect())
        .collect();
    let bands = levels
        .iter()
        .map(|track| {
            let lo = track.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = track.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        })
        .collect();
    Ok(BandStructure { phi_grid, levels, bands })
}

/// Spectrum of `T(E)` at real energy, partitioned into unit-circle
/// eigenvalues and `(t, 1/t*)` pairs.
#[derive(Debug, Clone)]
pub struct SpectralReport {
    pub energy: f64,
    /// All `2M` eigenvalues, sorted by `(|t|, arg t)`.
    pub eigenvalues: Vec<Complex64>,
    /// Off-circle pairs `(t, t')` with `t t'^* ~ 1`, larger modulus first.
    pub pairs: Vec<(Complex64, Complex64)>,
    /// Number of unit-circle eigenvalue pairs (`2 nu` eigenvalues on circle).
    pub nu: usize,
    /// Exponents `lambda_a = |log |t_a||`, one per off-circle pair.
    pub lambdas: Vec<f64>,
    /// Phases of the unit-circle eigenvalues, ascending.
    pub thetas: Vec<f64>,
    /// Phases of the off-circle pairs (each pair shares one, up to roundoff).
    pub pair_phases: Vec<f64>,
    /// Worst pairing residual `|t t'^* - 1|`, conditioning-scaled.
    pub pairing_residual: f64,
}

/// Classifies the spectrum of `T(E)` at real `e`.
///
/// `eps_circle` defaults to the scaled width [`eps_circle_default`]. The
/// pairing tolerance is scaled by `||T|| * max(|t|, |t'|)`: the small member
/// of a strongly split pair only carries that much accuracy.
pub fn spectral_report(
    chain: &BlockChain,
    e: f64,
    eps_circle: Option<f64>,
) -> Result<SpectralReport> {
    let eps = eps_circle.unwrap_or_else(|| eps_circle_default(chain));
    let t = transfer_product(chain, Complex64::new(e, 0.0))?;
    let eigenvalues = crate::numkernel::general_eigenvalues(t.matrix())?;
    let t_scale = t.matrix().norm();

    let (circle, off): (Vec<Complex64>, Vec<Complex64>) =
        eigenvalues.iter().copied().partition(|t| (t.norm() - 1.0).abs() <= eps);
    if circle.len() % 2 != 0 {
        return Err(Error::AmbiguousPairing(format!(
            "{} unit-circle eigenvalues (odd) at eps = {eps:.3e}",
            circle.len()
        )));
    }
    let nu = circle.len() / 2;
    let mut thetas: Vec<f64> = circle.iter().map(|t| t.arg()).collect();
    thetas.sort_by(f64::total_cmp);

    // greedy pairing of the off-circle values by the product criterion
    let mut remaining = off;
    let mut pairs = Vec::new();
    let mut worst_scaled = 0.0_f64;
    while let Some(t0) = remaining.pop() {
        if remaining.is_empty() {
            return Err(Error::AmbiguousPairing(
                "odd number of off-circle eigenvalues".into(),
            ));
        }
        let (idx, residual) = remaining
            .iter()
            .enumerate()
            .map(|(i, t1)| (i, (t0 * t1.conj() - Complex64::ONE).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        let t1 = remaining.swap_remove(idx);
        let big = t0.norm().max(t1.norm());
        // achievable accuracy for the weak member of the pair
        let tol = 1e-10 * (2 * chain.block_size() * chain.slices()) as f64
            * (t_scale * big).max(1.0);
        let scaled = residual / tol.max(1e-300);
        worst_scaled = worst_scaled.max(scaled);
        if scaled > 1.0 {
            return Err(Error::AmbiguousPairing(format!(
                "pair residual {residual:.3e} exceeds scaled tolerance {tol:.3e} \
                 for eigenvalues {t0} and {t1}"
            )));
        }
        let (hi, lo) = if t0.norm() >= t1.norm() { (t0, t1) } else { (t1, t0) };
        pairs.push((hi, lo));
    }
    pairs.sort_by(|a, b| b.0.norm().total_cmp(&a.0.norm()));
    // the large member's magnitude is the well-conditioned one
    let lambdas: Vec<f64> = pairs.iter().map(|(hi, _)| hi.norm().ln().abs()).collect();
    let pair_phases: Vec<f64> = pairs.iter().map(|(hi, _)| hi.arg()).collect();

    Ok(SpectralReport {
        energy: e,
        eigenvalues,
        pairs,
        nu,
        lambdas,
        thetas,
        pair_phases,
        pairing_residual: worst_scaled,
    })
}

/// Pointwise modulus form of the duality at real `E` and `z = e^{i phi}`:
/// the classified spectrum against `|det[E - H(e^{i phi})]| / |det(L...)|`,
/// compared in log form.
pub fn modulus_identity_defect(chain: &BlockChain, e: f64, phi: f64) -> Result<f64> {
    let report = spectral_report(chain, e, None)?;
    let mut lhs = 0.0_f64;
    for (k, lambda) in report.lambdas.iter().enumerate() {
        let theta = report.pair_phases[k];
        lhs += (2.0 * lambda.cosh() - 2.0 * (theta - phi).cos()).abs().ln();
    }
    for theta in &report.thetas {
        lhs += (2.0 * ((theta - phi) / 2.0).sin().abs()).ln();
    }
    let det = TwistedDeterminant::prepare(chain, Complex64::new(e, 0.0));
    let ld = det.eval(Complex64::from_polar(1.0, phi))?;
    let rhs = ld.log_mag - chain.coupling_log_determinant()?.log_mag;
    Ok((lhs - rhs).abs())
}

/// Both sides of a Thouless-type sum rule.
#[derive(Debug, Clone, Copy)]
pub struct ThoulessCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub converged: bool,
    pub nodes: usize,
}

/// Sum rule for the transfer-matrix exponents at real energy:
/// `sum_a lambda_a = -sum_j log|det L_j|
///                   + (1/2pi) int log|det[E - H(e^{i phi})]| dphi`.
///
/// The integrand has log zeros at the phases of the unit-circle eigenvalues;
/// those are subtracted exactly (each subtracted term integrates to zero)
/// so the quadrature only sees the smooth remainder. Near a band edge the
/// node budget is raised and the convergence flag relaxed.
pub fn thouless_sum(chain: &BlockChain, e: f64, quad_tol: f64) -> Result<ThoulessCheck> {
    thouless_sum_with(chain, e, quad_tol, None)
}

/// [`thouless_sum`] with an explicit unit-circle classification width.
pub fn thouless_sum_with(
    chain: &BlockChain,
    e: f64,
    quad_tol: f64,
    eps_circle: Option<f64>,
) -> Result<ThoulessCheck> {
    let report = spectral_report(chain, e, eps_circle)?;
    let lhs: f64 = parallel::pairwise_sum(&report.lambdas);

    let det = TwistedDeterminant::prepare(chain, Complex64::new(e, 0.0));
    let quad = singular_aware_quadrature(
        |phi| det.eval(Complex64::from_polar(1.0, phi)).map(|ld| ld.log_mag),
        &report.thetas,
        e,
        chain,
        quad_tol,
    )?;
    let rhs = -chain.coupling_log_determinant()?.log_mag + quad.value;
    Ok(ThoulessCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        converged: quad.converged,
        nodes: quad.nodes,
    })
}

/// Shared quadrature driver for the Thouless-type integrals: subtracts
/// `log|2 sin((theta - phi)/2)|` at the supplied singular phases, nudges
/// nodes that land exactly on a zero, and widens the budget near band edges.
pub(crate) fn singular_aware_quadrature<F>(
    eval: F,
    singular_phases: &[f64],
    e: f64,
    chain: &BlockChain,
    quad_tol: f64,
) -> Result<QuadratureResult>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let near_edge = nearest_band_edge_distance(chain, e)? < 1e-3;
    let (start_nodes, tol) = if near_edge {
        (1024_usize, quad_tol.max(1e-4))
    } else {
        (256_usize, quad_tol)
    };
    let integrand = |phi: f64| -> f64 {
        let mut phi_try = phi;
        for _ in 0..3 {
            match eval(phi_try) {
                Ok(v) => {
                    let mut out = v;
                    for theta in singular_phases {
                        out -= (2.0 * ((theta - phi_try) / 2.0).sin().abs()).ln();
                    }
                    return out;
                }
                Err(_) => phi_try += 1e-9,
            }
        }
        f64::NAN
    };
    let mut quad = periodic_quadrature(&integrand, start_nodes, tol, DEFAULT_MAX_NODES);
    if quad.value.is_nan() {
        return Err(Error::ResolventAtEigenvalue);
    }
    if near_edge {
        quad.converged = quad.converged || quad.last_delta <= 1e-4;
    }
    Ok(quad)
}

fn nearest_band_edge_distance(chain: &BlockChain, e: f64) -> Result<f64> {
    let mut best = f64::INFINITY;
    for z in [Complex64::ONE, -Complex64::ONE] {
        let h = chain.twisted_hamiltonian(z)?;
        for edge in hermitian_eigenvalues(h.matrix())? {
            best = best.min((edge - e).abs());
        }
    }
    Ok(best)
}

/// A wrapped phase difference, exposed for phase comparisons in tests.
pub fn phase_gap(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}
