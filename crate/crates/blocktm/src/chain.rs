//! Block-tridiagonal chain data and model generators.
//!
//! A [`BlockChain`] holds `N` Hermitian diagonal blocks `H_n` and `N - 1`
//! invertible couplings `L_n`, all of size `M x M`. Generators cover the
//! standard model families: an Anderson strip with on-site disorder, Gaussian
//! band-random chains, and the Floquet ladder `H_n = H_0 + n omega`.

use crate::error::{Error, Result};
use crate::numkernel::{add_scaled_identity_block, hermitian_defect, set_block};
use crate::CMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Relative Hermiticity tolerance for diagonal blocks.
const HERMITICITY_TOL: f64 = 1e-12;
/// Default floor on the singular-value ratio of couplings.
const DEFAULT_COND_FLOOR: f64 = 1e-10;

/// Gaussian ensembles for [`BlockChain::band_random`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ensemble {
    /// Real symmetric diagonal blocks, real couplings.
    Goe,
    /// Complex Hermitian diagonal blocks, complex couplings.
    Gue,
}

/// Seed-stream roles; each (seed, block, role) triple gets its own stream, so
/// chains are reproducible and sweeps are order-independent.
mod role {
    pub const DIAGONAL: u64 = 0x01;
    pub const COUPLING: u64 = 0x02;
    pub const REALIZATION: u64 = 0x03;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `(seed, index, role)` by hash mixing.
pub fn derive_seed(seed: u64, index: u64, role: u64) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93)) ^ role)
}

/// Seed for realization `r` of an ensemble sweep driven by `master`.
pub fn realization_seed(master: u64, r: u64) -> u64 {
    derive_seed(master, r, role::REALIZATION)
}

fn block_rng(seed: u64, index: u64, role: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut s = derive_seed(seed, index, role);
    for chunk in key.chunks_mut(8) {
        s = splitmix(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// The chain data: `N` Hermitian blocks `H_n`, `N - 1` invertible couplings.
#[derive(Debug, Clone)]
pub struct BlockChain {
    slices: usize,
    block_size: usize,
    h: Vec<CMatrix>,
    l: Vec<CMatrix>,
}

impl BlockChain {
    /// Builds a chain from explicit blocks, validating every invariant.
    ///
    /// Diagonal blocks within the Hermiticity tolerance are symmetrized to
    /// `(H + H^dagger)/2`; blocks beyond it are rejected. Couplings must keep
    /// a singular-value ratio of at least the default floor.
    pub fn new(h: Vec<CMatrix>, l: Vec<CMatrix>) -> Result<Self> {
        Self::with_cond_floor(h, l, DEFAULT_COND_FLOOR)
    }

    /// Same as [`BlockChain::new`] with an explicit invertibility floor.
    pub fn with_cond_floor(mut h: Vec<CMatrix>, l: Vec<CMatrix>, cond_floor: f64) -> Result<Self> {
        let slices = h.len();
        if slices < 2 {
            return Err(Error::DimensionMismatch(format!(
                "a chain needs at least 2 slices, got {slices}"
            )));
        }
        if l.len() != slices - 1 {
            return Err(Error::DimensionMismatch(format!(
                "expected {} couplings for {} slices, got {}",
                slices - 1,
                slices,
                l.len()
            )));
        }
        let m = h[0].nrows();
        if m == 0 {
            return Err(Error::DimensionMismatch("block size must be at least 1".into()));
        }
        for (i, b) in h.iter().enumerate() {
            if b.nrows() != m || b.ncols() != m {
                return Err(Error::DimensionMismatch(format!(
                    "diagonal block {i} is {}x{}, expected {m}x{m}",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        for (i, b) in l.iter().enumerate() {
            if b.nrows() != m || b.ncols() != m {
                return Err(Error::DimensionMismatch(format!(
                    "coupling block {i} is {}x{}, expected {m}x{m}",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        for (i, b) in h.iter_mut().enumerate() {
            let defect = hermitian_defect(b);
            let scale = b.norm().max(1.0);
            if defect > HERMITICITY_TOL * scale {
                return Err(Error::NonHermitianBlock { index: i, defect: defect / scale });
            }
            let sym = (&*b + b.adjoint()).scale(0.5);
            b.copy_from(&sym);
        }
        for (i, b) in l.iter().enumerate() {
            let sv = b.clone().svd(false, false).singular_values;
            let (smax, smin) = (sv[0], sv[sv.len() - 1]);
            let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
            if !(ratio >= cond_floor) {
                return Err(Error::SingularCoupling { index: i, ratio });
            }
        }
        Ok(BlockChain { slices, block_size: m, h, l })
    }

    /// Number of slices `N`.
    pub fn slices(&self) -> usize {
        self.slices
    }

    /// Block size `M`.
    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// Diagonal blocks `H_1 .. H_N` (0-indexed storage).
    pub fn diagonal_blocks(&self) -> &[CMatrix] {
        &self.h
    }

    /// Coupling blocks `L_1 .. L_{N-1}` (0-indexed storage).
    pub fn couplings(&self) -> &[CMatrix] {
        &self.l
    }

    /// Anderson strip: hard-wall transverse hopping with i.i.d. uniform
    /// on-site disorder of width `w`, unit couplings.
    pub fn anderson_strip(m: usize, n: usize, w: f64, seed: u64) -> Result<Self> {
        if !(w >= 0.0) {
            return Err(Error::ChainFormat(format!("disorder width must be >= 0, got {w}")));
        }
        let h = (0..n)
            .map(|k| {
                let mut rng = block_rng(seed, k as u64, role::DIAGONAL);
                let mut block = CMatrix::zeros(m, m);
                for i in 0..m {
                    block[(i, i)] = Complex64::new(rng.random_range(-0.5..=0.5) * w, 0.0);
                    if i + 1 < m {
                        block[(i, i + 1)] = Complex64::new(1.0, 0.0);
                        block[(i + 1, i)] = Complex64::new(1.0, 0.0);
                    }
                }
                block
            })
            .collect();
        let l = (0..n.saturating_sub(1)).map(|_| CMatrix::identity(m, m)).collect();
        Self::new(h, l)
    }

    /// Band-random chain: GOE or GUE diagonal blocks (off-diagonal variance
    /// 1/2 per real component, diagonal variance 1) and lower-triangular
    /// Gaussian couplings with diagonal entries kept away from zero.
    pub fn band_random(m: usize, n: usize, ensemble: Ensemble, seed: u64) -> Result<Self> {
        let sq2 = std::f64::consts::FRAC_1_SQRT_2;
        let h: Vec<CMatrix> = (0..n)
            .map(|k| {
                let mut rng = block_rng(seed, k as u64, role::DIAGONAL);
                let mut block = CMatrix::zeros(m, m);
                for i in 0..m {
                    let d: f64 = rng.sample(StandardNormal);
                    block[(i, i)] = Complex64::new(d, 0.0);
                    for j in (i + 1)..m {
                        let re: f64 = rng.sample(StandardNormal);
                        let x = match ensemble {
                            Ensemble::Goe => Complex64::new(re * sq2, 0.0),
                            Ensemble::Gue => {
                                let im: f64 = rng.sample(StandardNormal);
                                Complex64::new(re * sq2, im * sq2)
                            }
                        };
                        block[(i, j)] = x;
                        block[(j, i)] = x.conj();
                    }
                }
                block
            })
            .collect();
        let l: Vec<CMatrix> = (0..n.saturating_sub(1))
            .map(|k| {
                let mut rng = block_rng(seed, k as u64, role::COUPLING);
                let mut block = CMatrix::zeros(m, m);
                for i in 0..m {
                    for j in 0..=i {
                        let mut x = gaussian_entry(&mut rng, ensemble);
                        if i == j {
                            while x.norm() < 1e-3 {
                                x = gaussian_entry(&mut rng, ensemble);
                            }
                        }
                        block[(i, j)] = x;
                    }
                }
                block
            })
            .collect();
        Self::new(h, l)
    }

    /// Floquet ladder: `H_n = H_0 + n omega I` for `n = 1..N`, constant
    /// coupling `V`.
    pub fn floquet(h0: &CMatrix, v: &CMatrix, omega: f64, n: usize) -> Result<Self> {
        let m = h0.nrows();
        let h = (1..=n)
            .map(|k| {
                let mut block = h0.clone();
                for i in 0..m {
                    block[(i, i)] += Complex64::new(k as f64 * omega, 0.0);
                }
                block
            })
            .collect();
        let l = (0..n.saturating_sub(1)).map(|_| v.clone()).collect();
        Self::new(h, l)
    }

    /// The open Hamiltonian: diagonal blocks `H_n`, couplings on the off
    /// diagonals, zero corners. Hermitian by construction.
    pub fn open_hamiltonian(&self) -> DenseHamiltonian {
        let m = self.block_size;
        let size = self.slices * m;
        let mut mat = CMatrix::zeros(size, size);
        for (k, block) in self.h.iter().enumerate() {
            set_block(&mut mat, k, k, m, block);
        }
        for (k, block) in self.l.iter().enumerate() {
            set_block(&mut mat, k, k + 1, m, block);
            let adj = block.adjoint();
            set_block(&mut mat, k + 1, k, m, &adj);
        }
        DenseHamiltonian { kind: BoundaryKind::Open, block_size: m, slices: self.slices, mat }
    }

    /// The twisted Hamiltonian: open assembly plus corner blocks `z^{-1} I`
    /// at `(1, N)` and `z I` at `(N, 1)`.
    ///
    /// For `N = 2` the corners land on top of the existing couplings and are
    /// added to them.
    pub fn twisted_hamiltonian(&self, z: Complex64) -> Result<DenseHamiltonian> {
        if z == Complex64::ZERO {
            return Err(Error::ZeroTwist);
        }
        let mut dense = self.open_hamiltonian();
        let m = self.block_size;
        let last = self.slices - 1;
        add_scaled_identity_block(&mut dense.mat, 0, last, m, z.inv());
        add_scaled_identity_block(&mut dense.mat, last, 0, m, z);
        dense.kind = BoundaryKind::Twisted(z);
        Ok(dense)
    }

    /// Sum of `log det L_k` over all couplings.
    pub fn coupling_log_determinant(&self) -> Result<crate::numkernel::LogDet> {
        let mut acc = crate::numkernel::LogDet::one();
        for (i, l) in self.l.iter().enumerate() {
            let ld = crate::numkernel::logdet(l)
                .map_err(|_| Error::SingularCoupling { index: i, ratio: 0.0 })?;
            acc = acc.mul(ld);
        }
        Ok(acc)
    }

    /// Serializes to the chain JSON format.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&ChainFile::from(self)).expect("chain serialization cannot fail")
    }

    /// Reads a chain from the JSON format, re-validating all invariants.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ChainFile =
            serde_json::from_str(text).map_err(|e| Error::ChainFormat(e.to_string()))?;
        raw.try_into()
    }
}

fn gaussian_entry(rng: &mut ChaCha8Rng, ensemble: Ensemble) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    match ensemble {
        Ensemble::Goe => Complex64::new(re, 0.0),
        Ensemble::Gue => {
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im)
        }
    }
}

/// Boundary condition of an assembled Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryKind {
    Open,
    Twisted(Complex64),
}

/// Densely assembled `NM x NM` Hamiltonian.
#[derive(Debug, Clone)]
pub struct DenseHamiltonian {
    kind: BoundaryKind,
    block_size: usize,
    slices: usize,
    mat: CMatrix,
}

impl DenseHamiltonian {
    pub fn kind(&self) -> BoundaryKind {
        self.kind
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn size(&self) -> usize {
        self.mat.nrows()
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    /// Relative Hermiticity defect of the assembled matrix.
    pub fn hermiticity_defect(&self) -> f64 {
        hermitian_defect(&self.mat) / self.mat.norm().max(1.0)
    }
}

/// On-disk chain format:
/// `{"N": .., "M": .., "H": [[[re, im], ..], ..], "L": [..]}` with each block
/// a row-major list of `[re, im]` entries.
#[derive(Serialize, Deserialize)]
struct ChainFile {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "H")]
    h: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "L")]
    l: Vec<Vec<[f64; 2]>>,
}

impl From<&BlockChain> for ChainFile {
    fn from(chain: &BlockChain) -> Self {
        let flat = |mat: &CMatrix| -> Vec<[f64; 2]> {
            let m = mat.nrows();
            let mut out = Vec::with_capacity(m * m);
            for i in 0..m {
                for j in 0..m {
                    let x = mat[(i, j)];
                    out.push([x.re, x.im]);
                }
            }
            out
        };
        ChainFile {
            n: chain.slices,
            m: chain.block_size,
            h: chain.h.iter().map(flat).collect(),
            l: chain.l.iter().map(flat).collect(),
        }
    }
}

impl TryFrom<ChainFile> for BlockChain {
    type Error = Error;

    fn try_from(raw: ChainFile) -> Result<Self> {
        let unflatten = |entries: &[[f64; 2]], which: &str, index: usize| -> Result<CMatrix> {
            if entries.len() != raw.m * raw.m {
                return Err(Error::ChainFormat(format!(
                    "{which} block {index} has {} entries, expected {}",
                    entries.len(),
                    raw.m * raw.m
                )));
            }
            Ok(CMatrix::from_fn(raw.m, raw.m, |i, j| {
                let [re, im] = entries[i * raw.m + j];
                Complex64::new(re, im)
            }))
        };
        if raw.h.len() != raw.n {
            return Err(Error::ChainFormat(format!(
                "found {} diagonal blocks, header says N = {}",
                raw.h.len(),
                raw.n
            )));
        }
        if raw.l.len() + 1 != raw.n {
            return Err(Error::ChainFormat(format!(
                "found {} coupling blocks, expected N - 1 = {}",
                raw.l.len(),
                raw.n.saturating_sub(1)
            )));
        }
        let h = raw
            .h
            .iter()
            .enumerate()
            .map(|(i, b)| unflatten(b, "diagonal", i))
            .collect::<Result<Vec<_>>>()?;
        let l = raw
            .l
            .iter()
            .enumerate()
            .map(|(i, b)| unflatten(b, "coupling", i))
            .collect::<Result<Vec<_>>>()?;
        BlockChain::new(h, l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cplx;

    pub(crate) fn free_chain(n: usize) -> BlockChain {
        let h = vec![CMatrix::zeros(1, 1); n];
        let l = vec![CMatrix::identity(1, 1); n - 1];
        BlockChain::new(h, l).unwrap()
    }

    #[test]
    fn explicit_zero_identity_chains() {
        let c2 = free_chain(2);
        assert_eq!((c2.slices(), c2.block_size()), (2, 1));
        let c3 = free_chain(3);
        assert_eq!((c3.slices(), c3.block_size()), (3, 1));
    }

    #[test]
    fn non_hermitian_block_rejected() {
        let mut h1 = CMatrix::zeros(2, 2);
        h1[(0, 1)] = cplx(0.1, 0.0); // asymmetric by 0.1
        let h = vec![h1, CMatrix::zeros(2, 2)];
        let l = vec![CMatrix::identity(2, 2)];
        match BlockChain::new(h, l) {
            Err(Error::NonHermitianBlock { index: 0, .. }) => {}
            other => panic!("expected NonHermitianBlock, got {other:?}"),
        }
    }

    #[test]
    fn singular_coupling_rejected() {
        let h = vec![CMatrix::zeros(2, 2); 2];
        let mut l1 = CMatrix::zeros(2, 2);
        l1[(0, 0)] = cplx(1.0, 0.0); // rank 1
        match BlockChain::new(h, vec![l1]) {
            Err(Error::SingularCoupling { index: 0, .. }) => {}
            other => panic!("expected SingularCoupling, got {other:?}"),
        }
    }

    #[test]
    fn single_slice_rejected() {
        let err = BlockChain::new(vec![CMatrix::zeros(1, 1)], vec![]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn anderson_zero_disorder() {
        let chain = BlockChain::anderson_strip(1, 4, 0.0, 0).unwrap();
        for b in chain.diagonal_blocks() {
            assert_eq!(b[(0, 0)], cplx(0.0, 0.0));
        }
        for b in chain.couplings() {
            assert_eq!(b[(0, 0)], cplx(1.0, 0.0));
        }
        let hopping = BlockChain::anderson_strip(2, 2, 0.0, 0).unwrap();
        let expect = CMatrix::from_row_slice(
            2,
            2,
            &[cplx(0.0, 0.0), cplx(1.0, 0.0), cplx(1.0, 0.0), cplx(0.0, 0.0)],
        );
        for b in hopping.diagonal_blocks() {
            assert_eq!((b - &expect).norm(), 0.0);
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let a = BlockChain::anderson_strip(2, 3, 1.0, 7).unwrap();
        let b = BlockChain::anderson_strip(2, 3, 1.0, 7).unwrap();
        for (x, y) in a.diagonal_blocks().iter().zip(b.diagonal_blocks()) {
            assert_eq!(x, y, "anderson blocks must be bitwise identical");
        }
        let g1 = BlockChain::band_random(3, 4, Ensemble::Gue, 11).unwrap();
        let g2 = BlockChain::band_random(3, 4, Ensemble::Gue, 11).unwrap();
        for (x, y) in g1.diagonal_blocks().iter().zip(g2.diagonal_blocks()) {
            assert_eq!(x, y);
        }
        for (x, y) in g1.couplings().iter().zip(g2.couplings()) {
            assert_eq!(x, y);
        }
        let d1 = BlockChain::band_random(3, 4, Ensemble::Gue, 12).unwrap();
        assert_ne!(d1.diagonal_blocks()[0], g1.diagonal_blocks()[0]);
    }

    #[test]
    fn gue_blocks_are_genuinely_complex() {
        let mut complex_count = 0;
        for seed in 0..100 {
            let c = BlockChain::band_random(2, 2, Ensemble::Gue, seed).unwrap();
            let b = &c.diagonal_blocks()[0];
            if (b - b.transpose()).norm() > 1e-12 {
                complex_count += 1;
            }
        }
        assert!(complex_count > 90, "GUE blocks should be non-symmetric generically");
    }

    #[test]
    fn goe_blocks_are_real_symmetric() {
        let c = BlockChain::band_random(3, 2, Ensemble::Goe, 5).unwrap();
        for b in c.diagonal_blocks() {
            assert!(b.iter().all(|x| x.im == 0.0));
            assert!((b - b.transpose()).norm() == 0.0);
        }
    }

    #[test]
    fn floquet_ladder_matches_formula() {
        let h0 = CMatrix::zeros(1, 1);
        let v = CMatrix::identity(1, 1);
        let chain = BlockChain::floquet(&h0, &v, 1.0, 3).unwrap();
        let diags: Vec<f64> = chain.diagonal_blocks().iter().map(|b| b[(0, 0)].re).collect();
        assert_eq!(diags, vec![1.0, 2.0, 3.0]);

        let constant = BlockChain::floquet(&h0, &v, 0.0, 3).unwrap();
        assert!(constant.diagonal_blocks().iter().all(|b| b[(0, 0)] == cplx(0.0, 0.0)));

        let pauli_x = CMatrix::from_row_slice(
            2,
            2,
            &[cplx(0.0, 0.0), cplx(1.0, 0.0), cplx(1.0, 0.0), cplx(0.0, 0.0)],
        );
        let f = BlockChain::floquet(&pauli_x, &CMatrix::identity(2, 2), 0.5, 2).unwrap();
        assert!((f.diagonal_blocks()[0][(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((f.diagonal_blocks()[1][(0, 0)].re - 1.0).abs() < 1e-15);
        assert!((f.diagonal_blocks()[1][(0, 1)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn floquet_rejects_singular_coupling() {
        let h0 = CMatrix::zeros(2, 2);
        let v = CMatrix::zeros(2, 2);
        assert!(matches!(
            BlockChain::floquet(&h0, &v, 1.0, 3),
            Err(Error::SingularCoupling { .. })
        ));
    }

    #[test]
    fn open_assembly_free_chains() {
        let c2 = free_chain(2);
        let mat2 = c2.open_hamiltonian();
        let expect2 = CMatrix::from_row_slice(
            2,
            2,
            &[cplx(0.0, 0.0), cplx(1.0, 0.0), cplx(1.0, 0.0), cplx(0.0, 0.0)],
        );
        assert_eq!((mat2.matrix() - expect2).norm(), 0.0);

        let c3 = free_chain(3);
        let mat3 = c3.open_hamiltonian();
        for i in 0..3_usize {
            for j in 0..3_usize {
                let expect = if i.abs_diff(j) == 1 { 1.0 } else { 0.0 };
                assert_eq!(mat3.matrix()[(i, j)], cplx(expect, 0.0));
            }
        }

        let strip = BlockChain::anderson_strip(2, 2, 0.0, 0).unwrap();
        let mat = strip.open_hamiltonian();
        assert_eq!(mat.size(), 4);
        assert_eq!(mat.matrix()[(0, 1)], cplx(1.0, 0.0)); // transverse hop
        assert_eq!(mat.matrix()[(0, 2)], cplx(1.0, 0.0)); // identity coupling
        assert_eq!(mat.matrix()[(1, 3)], cplx(1.0, 0.0));
        assert!(mat.hermiticity_defect() < 1e-15);
    }

    #[test]
    fn twisted_assembly_free_chains() {
        let z = cplx(0.4, 0.3);
        let c2 = free_chain(2);
        let t2 = c2.twisted_hamiltonian(z).unwrap();
        assert!((t2.matrix()[(0, 1)] - (cplx(1.0, 0.0) + z.inv())).norm() < 1e-15);
        assert!((t2.matrix()[(1, 0)] - (cplx(1.0, 0.0) + z)).norm() < 1e-15);

        let c3 = free_chain(3);
        let t3 = c3.twisted_hamiltonian(z).unwrap();
        assert!((t3.matrix()[(0, 2)] - z.inv()).norm() < 1e-15);
        assert!((t3.matrix()[(2, 0)] - z).norm() < 1e-15);
        assert_eq!(t3.matrix()[(0, 1)], cplx(1.0, 0.0));
    }

    #[test]
    fn unit_twist_is_hermitian() {
        let chain = BlockChain::band_random(2, 4, Ensemble::Gue, 3).unwrap();
        let t = chain.twisted_hamiltonian(cplx(1.0, 0.0)).unwrap();
        assert!(t.hermiticity_defect() < 1e-12);
        let phase = cplx(0.6, 0.8); // |z| = 1
        let t2 = chain.twisted_hamiltonian(phase).unwrap();
        assert!(t2.hermiticity_defect() < 1e-12);
    }

    #[test]
    fn twist_conjugation_symmetry() {
        // H(z*)^dagger equals H(1/z), also for N = 2 where corners overlap
        for n in [2, 3, 5] {
            let chain = BlockChain::band_random(2, n, Ensemble::Gue, 42).unwrap();
            let z = cplx(1.3, -0.4);
            let lhs = chain.twisted_hamiltonian(z.conj()).unwrap().matrix().adjoint();
            let rhs = chain.twisted_hamiltonian(z.inv()).unwrap();
            assert!((lhs - rhs.matrix()).norm() < 1e-12, "defect at n={n}");
        }
    }

    #[test]
    fn zero_twist_rejected() {
        let chain = free_chain(3);
        assert!(matches!(chain.twisted_hamiltonian(Complex64::ZERO), Err(Error::ZeroTwist)));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let chain = BlockChain::band_random(2, 3, Ensemble::Gue, 9).unwrap();
        let text = chain.to_json();
        let back = BlockChain::from_json(&text).unwrap();
        for (a, b) in chain.diagonal_blocks().iter().zip(back.diagonal_blocks()) {
            assert!((a - b).norm() < 1e-15);
        }

        // tampered file: non-Hermitian block must be rejected by the reader
        let bad = r#"{"N":2,"M":1,"H":[[[0.0,1.0]],[[0.0,0.0]]],"L":[[[1.0,0.0]]]}"#;
        assert!(matches!(BlockChain::from_json(bad), Err(Error::NonHermitianBlock { .. })));

        // block count mismatch
        let short = r#"{"N":3,"M":1,"H":[[[0.0,0.0]],[[0.0,0.0]]],"L":[[[1.0,0.0]]]}"#;
        assert!(matches!(BlockChain::from_json(short), Err(Error::ChainFormat(_))));
    }
}
