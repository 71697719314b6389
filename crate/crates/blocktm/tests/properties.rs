//! Property tests for the structural invariants: corner sweeps against dense
//! inverses, log-determinant algebra, quadrature exactness, twist symmetries
//! and spectral pairing.

use blocktm::chain::{BlockChain, Ensemble};
use blocktm::duality::duality_residual;
use blocktm::numkernel::{
    general_eigenvalues, logdet, periodic_quadrature, BlockTridiag,
};
use blocktm::transfer::{transfer_product, transfer_product_stabilized};
use blocktm::CMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn splitmix_matrix(n: usize, seed: u64, diag_shift: f64) -> CMatrix {
    let mut s = seed;
    let mut next = move || {
        s = s.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = s;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    CMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { diag_shift } else { 0.0 };
        c(next() + d, next())
    })
}

fn arbitrary_chain(kind: u8, m: usize, n: usize, seed: u64) -> BlockChain {
    match kind % 3 {
        0 => BlockChain::anderson_strip(m, n, 1.0 + (seed % 5) as f64 * 0.3, seed).unwrap(),
        1 => BlockChain::band_random(m, n, Ensemble::Goe, seed).unwrap(),
        _ => BlockChain::band_random(m, n, Ensemble::Gue, seed).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn corner_sweep_equals_dense_inverse(
        m in 1_usize..=4,
        p in 2_usize..=8,
        seed in 0_u64..1_000_000,
    ) {
        let diag: Vec<CMatrix> =
            (0..p).map(|k| splitmix_matrix(m, seed.wrapping_add(k as u64), 2.5)).collect();
        let upper: Vec<CMatrix> =
            (0..p - 1).map(|k| splitmix_matrix(m, seed.wrapping_add(100 + k as u64), 0.0)).collect();
        let lower: Vec<CMatrix> =
            (0..p - 1).map(|k| splitmix_matrix(m, seed.wrapping_add(200 + k as u64), 0.0)).collect();
        let tri = BlockTridiag { diag: &diag, upper: &upper, lower: &lower };
        let corners = tri.inverse_corners().unwrap();
        let dense = tri.assemble();
        let inv = dense.try_inverse().unwrap();
        let scale = inv.norm().max(1.0);
        let pick = |bi: usize, bj: usize| inv.view((bi * m, bj * m), (m, m)).into_owned();
        prop_assert!((corners.c11 - pick(0, 0)).norm() <= 1e-9 * scale);
        prop_assert!((corners.c1n - pick(0, p - 1)).norm() <= 1e-9 * scale);
        prop_assert!((corners.cn1 - pick(p - 1, 0)).norm() <= 1e-9 * scale);
        prop_assert!((corners.cnn - pick(p - 1, p - 1)).norm() <= 1e-9 * scale);
    }

    #[test]
    fn logdet_respects_products(seed in 0_u64..1_000_000, n in 2_usize..=7) {
        let a = splitmix_matrix(n, seed, 1.0);
        let b = splitmix_matrix(n, seed.wrapping_add(777), 1.0);
        let lhs = logdet(&(&a * &b)).unwrap();
        let rhs = logdet(&a).unwrap().mul(logdet(&b).unwrap());
        prop_assert!(lhs.mag_distance(rhs) <= 1e-9);
        prop_assert!(lhs.phase_distance(rhs) <= 1e-9);
    }

    #[test]
    fn quadrature_exact_on_trig_polynomials(
        a1 in -2.0_f64..2.0,
        b3 in -2.0_f64..2.0,
        a7 in -2.0_f64..2.0,
        c0 in -2.0_f64..2.0,
        phase in 0.0_f64..6.28,
    ) {
        let f = move |phi: f64| {
            c0 + a1 * (phi + phase).cos() + b3 * (3.0 * phi).sin() + a7 * (7.0 * phi + phase).cos()
        };
        // 16 nodes integrate trigonometric degree < 8 exactly
        let r = periodic_quadrature(f, 16, 1e-13, 64);
        prop_assert!((r.value - c0).abs() <= 1e-12);
    }

    #[test]
    fn twist_symmetries_hold(
        kind in 0_u8..3,
        m in 1_usize..=3,
        n in 2_usize..=6,
        seed in 0_u64..1_000_000,
        phi in 0.01_f64..6.2,
        re in -1.5_f64..1.5,
        im in 0.1_f64..1.5,
    ) {
        let chain = arbitrary_chain(kind, m, n, seed);
        // Hermitian on the unit circle
        let on_circle = chain.twisted_hamiltonian(Complex64::from_polar(1.0, phi)).unwrap();
        prop_assert!(on_circle.hermiticity_defect() <= 1e-12);
        // adjoint pairing off the circle
        let z = c(re, im);
        let lhs = chain.twisted_hamiltonian(z.conj()).unwrap().matrix().adjoint();
        let rhs = chain.twisted_hamiltonian(z.inv()).unwrap();
        prop_assert!((lhs - rhs.matrix()).norm() <= 1e-12 * rhs.matrix().norm().max(1.0));
    }

    #[test]
    fn duality_residuals_stay_small(
        kind in 0_u8..3,
        m in 1_usize..=3,
        n in 2_usize..=7,
        seed in 0_u64..1_000_000,
        e_re in -1.2_f64..1.2,
        e_im in 0.05_f64..0.8,
        z_mag in 0.3_f64..2.0,
        z_arg in 0.0_f64..6.28,
    ) {
        let chain = arbitrary_chain(kind, m, n, seed);
        // complex E keeps the grid away from real spectra for any chain
        let e = c(e_re, e_im);
        let z = Complex64::from_polar(z_mag, z_arg);
        let r = duality_residual(&chain, e, z).unwrap();
        prop_assert!(r.mag_err <= 1e-8, "mag {}", r.mag_err);
        prop_assert!(r.phase_err <= 1e-8, "phase {}", r.phase_err);
    }

    #[test]
    fn no_unit_circle_eigenvalues_at_complex_energy(
        kind in 0_u8..3,
        m in 1_usize..=3,
        n in 2_usize..=6,
        seed in 0_u64..1_000_000,
        e_re in -1.5_f64..1.5,
    ) {
        let chain = arbitrary_chain(kind, m, n, seed);
        let t = transfer_product(&chain, c(e_re, 0.1)).unwrap();
        for v in general_eigenvalues(t.matrix()).unwrap() {
            prop_assert!((v.norm() - 1.0).abs() > 1e-10, "|{v}| on the unit circle");
        }
    }

    #[test]
    fn stabilized_reconstructs_plain(
        kind in 0_u8..3,
        m in 1_usize..=3,
        n in 2_usize..=12,
        seed in 0_u64..1_000_000,
        e_re in -1.0_f64..1.0,
    ) {
        let chain = arbitrary_chain(kind, m, n, seed);
        let e = c(e_re, 0.0);
        let plain = transfer_product(&chain, e).unwrap();
        let stab = transfer_product_stabilized(&chain, e).unwrap();
        let rebuilt = stab.matrix() * c(stab.scale().exp(), 0.0);
        let scale = plain.matrix().norm().max(1.0);
        prop_assert!((plain.matrix() - rebuilt).norm() <= 1e-8 * scale);
        prop_assert!(stab.det_modulus_defect() <= 1e-8);
    }

    #[test]
    fn chain_json_round_trip(
        kind in 0_u8..3,
        m in 1_usize..=4,
        n in 2_usize..=6,
        seed in 0_u64..1_000_000,
    ) {
        let chain = arbitrary_chain(kind, m, n, seed);
        let text = chain.to_json();
        let back = BlockChain::from_json(&text).unwrap();
        for (a, b) in chain.diagonal_blocks().iter().zip(back.diagonal_blocks()) {
            prop_assert!((a - b).norm() == 0.0, "diagonal blocks drifted through JSON");
        }
        for (a, b) in chain.couplings().iter().zip(back.couplings()) {
            prop_assert!((a - b).norm() == 0.0, "couplings drifted through JSON");
        }
    }
}
