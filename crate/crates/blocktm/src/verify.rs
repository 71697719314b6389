//! The identity-verification suite: runs every spectral identity on a chain
//! over a grid of energies and twists and reports the worst residual per
//! identity.

use crate::chain::BlockChain;
use crate::duality::{
    duality_residual_prepared, inverse_duality_residual, modulus_identity_defect,
    symmetric_duality_residual, thouless_sum,
};
use crate::error::Result;
use crate::numkernel::{general_eigenvalues, identity, logdet};
use crate::parallel;
use crate::qmat::{
    build_k_twisted, k_prime_conjugation_defect, q_duality_residual, q_from_doubled_product,
    q_matrix, q_symplectic_defect, q_thouless_sum, reversal_permutation,
};
use crate::resolvent::{
    boundary_identities_defect, corner_blocks_sweep, lippmann_schwinger_check,
    resolvent_trace_variants, trace_identity_check, transfer_resolvent_with,
    twisted_boundary_defect, TwistedDeterminant,
};
use crate::transfer::{symplectic_defect, transfer_from_resolvent, transfer_product};
use crate::CMatrix;
use num_complex::Complex64;
use std::collections::BTreeMap;

/// Energies and twists the suite sweeps over.
#[derive(Debug, Clone)]
pub struct IdentityGrid {
    pub energies: Vec<Complex64>,
    pub twists: Vec<Complex64>,
}

impl Default for IdentityGrid {
    fn default() -> Self {
        IdentityGrid {
            energies: vec![
                Complex64::new(0.17, 0.0),
                Complex64::new(-0.42, 0.0),
                Complex64::new(0.31, 0.64),
            ],
            twists: vec![
                Complex64::from_polar(1.0, 0.73),
                Complex64::from_polar(0.55, 2.1),
                Complex64::from_polar(1.9, -1.2),
            ],
        }
    }
}

/// Options for a suite run.
#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    /// Pass threshold for the linear-algebra identities.
    pub tol: f64,
    /// Deliberately corrupt one check; the suite must then fail.
    pub sabotage: bool,
    /// Include the quadrature-based sum rules and the pointwise modulus
    /// identity (real energies only; slower, and held to the relaxed bar).
    pub with_sum_rules: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { tol: 1e-8, sabotage: false, with_sum_rules: true }
    }
}

/// Keys whose accuracy is limited by quadrature or extracted spectra rather
/// than by plain linear algebra; they get `max(tol, 1e-6)` as their bar.
const QUADRATURE_LIMITED: [&str; 4] =
    ["thouless_sum", "q_thouless_sum", "modulus_identity", "q_modulus_identity"];

/// Worst residual per identity, with the pass verdict.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub residuals: BTreeMap<String, f64>,
    pub tol: f64,
    /// Logged values of the trace-identity sign audit at the first grid
    /// point: (lhs, minus-variant rhs, plus-variant rhs).
    pub sign_audit: Option<(Complex64, Complex64, Complex64)>,
}

impl SuiteReport {
    /// Threshold applied to one identity key.
    pub fn threshold_for(&self, key: &str) -> f64 {
        if QUADRATURE_LIMITED.contains(&key) {
            self.tol.max(1e-6)
        } else {
            self.tol
        }
    }

    pub fn pass(&self) -> bool {
        self.residuals
            .iter()
            .all(|(k, r)| r.is_finite() && *r <= self.threshold_for(k))
    }

    /// Identities exceeding their threshold, worst first.
    pub fn failures(&self) -> Vec<(&str, f64)> {
        let mut out: Vec<(&str, f64)> = self
            .residuals
            .iter()
            .filter(|(k, r)| !r.is_finite() || **r > self.threshold_for(k))
            .map(|(k, r)| (k.as_str(), *r))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1));
        out
    }
}

fn fold_max(map: &mut BTreeMap<String, f64>, key: &str, value: f64) {
    let slot = map.entry(key.to_string()).or_insert(0.0);
    if value > *slot || !value.is_finite() {
        *slot = value;
    }
}

/// Runs the full identity suite on one chain.
///
/// Every residual is an absolute defect (Frobenius norm, log-magnitude or
/// wrapped-phase difference) that vanishes in exact arithmetic; matrix-sized
/// defects are normalized by the magnitude of the objects involved.
pub fn run_identity_suite(
    chain: &BlockChain,
    grid: &IdentityGrid,
    opts: &SuiteOptions,
) -> Result<SuiteReport> {
    assert!(!grid.energies.is_empty() && !grid.twists.is_empty(), "empty identity grid");
    let mut residuals: BTreeMap<String, f64> = BTreeMap::new();
    let m = chain.block_size();

    let per_energy: Vec<Result<BTreeMap<String, f64>>> =
        parallel::map_slice(&grid.energies, |&e| {
            let mut local: BTreeMap<String, f64> = BTreeMap::new();
            let t = transfer_product(chain, e)?;
            let det = TwistedDeterminant::prepare(chain, e);
            let t_norm = t.matrix().norm().max(1.0);

            // symplectic structure and determinant modulus
            fold_max(&mut local, "symplectic", symplectic_defect(chain, e)? / t_norm);
            fold_max(&mut local, "det_modulus", t.det_modulus_defect());
            fold_max(&mut local, "det_modulus_direct", logdet(t.matrix())?.log_mag.abs());

            // resolvent representation of T(E)
            let cb = corner_blocks_sweep(chain, e)?;
            let t_res = transfer_from_resolvent(&cb)?;
            fold_max(
                &mut local,
                "corner_representation",
                (t.matrix() - t_res.matrix()).norm() / t_norm,
            );
            fold_max(
                &mut local,
                "boundary_identities",
                boundary_identities_defect(chain, e)? / t_norm,
            );

            // corner determinant identity:
            // det G1N^{-1} = (-1)^M det(L...)^{-1} det[E - H]
            // (the sign follows from the leading-term comparison; it is
            // invisible for even M)
            let lhs = logdet(&cb.g1n)?.powi(-1);
            let sign = crate::numkernel::LogDet { log_mag: 0.0, phase: m as f64 * std::f64::consts::PI };
            let rhs = sign
                .mul(det.open_log_determinant()?)
                .div(chain.coupling_log_determinant()?);
            fold_max(&mut local, "corner_determinant_mag", lhs.mag_distance(rhs));
            fold_max(&mut local, "corner_determinant_phase", lhs.phase_distance(rhs));

            for &z in &grid.twists {
                // duality family
                let d = duality_residual_prepared(chain, &t, &det, z)?;
                let d_mag = if opts.sabotage { d.mag_err + 1.0 } else { d.mag_err };
                fold_max(&mut local, "duality_mag", d_mag);
                fold_max(&mut local, "duality_phase", d.phase_err);
                let di = inverse_duality_residual(chain, e, z)?;
                fold_max(&mut local, "inverse_duality_mag", di.mag_err);
                fold_max(&mut local, "inverse_duality_phase", di.phase_err);
                let ds = symmetric_duality_residual(chain, e, z)?;
                fold_max(&mut local, "symmetric_duality_mag", ds.mag_err);
                fold_max(&mut local, "symmetric_duality_phase", ds.phase_err);

                // twisted resolvent identities
                fold_max(
                    &mut local,
                    "twisted_boundary",
                    twisted_boundary_defect(chain, e, z)? / t_norm,
                );
                let r = transfer_resolvent_with(chain, &t, e, z)?;
                let shifted = t.matrix() - identity(2 * m) * z;
                fold_max(
                    &mut local,
                    "transfer_resolvent",
                    (&r * shifted - identity(2 * m)).norm(),
                );
                fold_max(
                    &mut local,
                    "resolvent_coupling",
                    lippmann_schwinger_check(chain, e, z)?,
                );
                fold_max(&mut local, "resolvent_trace", trace_identity_check(chain, e, z)?.residual);

                // doubled-Hamiltonian dualities
                let qd = q_duality_residual(chain, e, z)?;
                fold_max(&mut local, "q_duality_mag", qd.plain.mag_err);
                fold_max(&mut local, "q_duality_phase", qd.plain.phase_err);
                fold_max(&mut local, "q_duality_rotated_mag", qd.rotated.mag_err);
                fold_max(&mut local, "q_duality_rotated_phase", qd.rotated.phase_err);
            }

            // symplectic-like structure of Q
            let q = q_matrix(chain, e)?;
            let q_norm = q.norm().max(1.0);
            fold_max(&mut local, "q_symplectic", q_symplectic_defect(chain, e)? / q_norm.powi(2));
            fold_max(
                &mut local,
                "q_doubled_product",
                (q_from_doubled_product(chain, e)? - &q).norm() / q_norm,
            );
            Ok(local)
        });
    for item in per_energy {
        for (k, v) in item? {
            fold_max(&mut residuals, &k, v);
        }
    }

    // structural checks of the doubled operators; one grid point suffices,
    // the content is assembly-level
    let e0 = grid.energies[0];
    let z0 = grid.twists[0];
    {
        let n = chain.slices();
        let nm = n * m;
        let k = build_k_twisted(chain, e0, z0)?;
        let k_adj_partner = build_k_twisted(chain, e0.conj(), z0.conj().inv())?;
        fold_max(
            &mut residuals,
            "doubled_adjoint",
            (k.matrix().adjoint() - k_adj_partner.matrix()).norm(),
        );
        let p = reversal_permutation(n, m);
        let mut pi = CMatrix::zeros(2 * nm, 2 * nm);
        pi.view_mut((0, nm), (nm, nm)).copy_from(&p);
        pi.view_mut((nm, 0), (nm, nm)).copy_from(&(-&p));
        let mut pi_inv = CMatrix::zeros(2 * nm, 2 * nm);
        pi_inv.view_mut((0, nm), (nm, nm)).copy_from(&(-&p));
        pi_inv.view_mut((nm, 0), (nm, nm)).copy_from(&p);
        let reversal_partner = build_k_twisted(chain, e0.conj(), z0.inv())?;
        fold_max(
            &mut residuals,
            "doubled_reversal",
            (&pi * k.matrix() * &pi_inv + reversal_partner.matrix()).norm(),
        );
        fold_max(
            &mut residuals,
            "q_rotation_consistency",
            k_prime_conjugation_defect(chain, e0, z0)?,
        );

        // spectrum of K(E, -1): (x, -x*) pairing and the absence of a zero
        // mode off the positive real axis
        let k_neg = build_k_twisted(chain, e0, -Complex64::ONE)?;
        let spec = general_eigenvalues(k_neg.matrix())?;
        let scale = spec.iter().map(|x| x.norm()).fold(1.0_f64, f64::max);
        let mut pairing = 0.0_f64;
        let mut min_mag = f64::INFINITY;
        for x in &spec {
            min_mag = min_mag.min(x.norm());
            let mirror = -x.conj();
            let dist = spec.iter().map(|y| (y - mirror).norm()).fold(f64::INFINITY, f64::min);
            pairing = pairing.max(dist / scale);
        }
        fold_max(&mut residuals, "doubled_pairing", pairing);
        fold_max(
            &mut residuals,
            "doubled_no_zero_mode",
            if min_mag > 1e-8 { 0.0 } else { 1.0 },
        );
    }

    // sign audit of the derivative form of the trace identity
    let variants = resolvent_trace_variants(chain, e0, z0)?;
    let sign_audit = Some((variants.lhs, variants.rhs_minus, variants.rhs_plus));

    // real-energy sum rules and the pointwise modulus identity
    if opts.with_sum_rules {
        let real_energies: Vec<f64> =
            grid.energies.iter().filter(|e| e.im == 0.0).map(|e| e.re).collect();
        for e in real_energies {
            for phi in [0.47_f64, 2.03, 4.11] {
                fold_max(&mut residuals, "modulus_identity", modulus_identity_defect(chain, e, phi)?);
                fold_max(
                    &mut residuals,
                    "q_modulus_identity",
                    crate::qmat::q_modulus_identity_defect(chain, e, phi)?,
                );
            }
            let th = thouless_sum(chain, e, 1e-9)?;
            fold_max(&mut residuals, "thouless_sum", th.residual);
            let qt = q_thouless_sum(chain, e, 1e-9)?;
            fold_max(&mut residuals, "q_thouless_sum", qt.residual);
        }
    }

    Ok(SuiteReport { residuals, tol: opts.tol, sign_audit })
}

/// Eigenvalue cross-listing: every eigenvalue `E` of `H(z)` must appear as
/// the twist `z` in the spectrum of `T(E)`. Returns the worst distance.
pub fn duality_cross_listing_defect(chain: &BlockChain, z: Complex64) -> Result<f64> {
    let hz = chain.twisted_hamiltonian(z)?;
    let energies = general_eigenvalues(hz.matrix())?;
    let distances: Vec<Result<f64>> = parallel::map_slice(&energies, |&e| {
        let t = transfer_product(chain, e)?;
        let spec = general_eigenvalues(t.matrix())?;
        Ok(spec.iter().map(|s| (s - z).norm()).fold(f64::INFINITY, f64::min))
    });
    let mut worst = 0.0_f64;
    for d in distances {
        worst = worst.max(d?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::Ensemble;

    #[test]
    fn suite_passes_on_free_chain() {
        let h = vec![crate::CMatrix::zeros(1, 1); 3];
        let l = vec![crate::CMatrix::identity(1, 1); 2];
        let chain = BlockChain::new(h, l).unwrap();
        let report =
            run_identity_suite(&chain, &IdentityGrid::default(), &SuiteOptions::default())
                .unwrap();
        assert!(report.pass(), "failures: {:?}", report.failures());
        assert!(report.sign_audit.is_some());
    }

    #[test]
    fn suite_passes_on_random_chain() {
        let chain = BlockChain::band_random(2, 5, Ensemble::Gue, 71).unwrap();
        let report =
            run_identity_suite(&chain, &IdentityGrid::default(), &SuiteOptions::default())
                .unwrap();
        assert!(report.pass(), "failures: {:?}", report.failures());
    }

    #[test]
    fn sabotage_fails_the_suite() {
        let chain = BlockChain::band_random(1, 4, Ensemble::Goe, 72).unwrap();
        let opts = SuiteOptions { sabotage: true, ..Default::default() };
        let report = run_identity_suite(&chain, &IdentityGrid::default(), &opts).unwrap();
        assert!(!report.pass());
        assert!(report.failures().iter().any(|(k, _)| *k == "duality_mag"));
    }

    #[test]
    fn cross_listing_on_free_chain() {
        let h = vec![crate::CMatrix::zeros(1, 1); 4];
        let l = vec![crate::CMatrix::identity(1, 1); 3];
        let chain = BlockChain::new(h, l).unwrap();
        let d = duality_cross_listing_defect(&chain, Complex64::from_polar(1.3, 0.8)).unwrap();
        assert!(d < 1e-7, "cross-listing defect {d}");
    }
}
