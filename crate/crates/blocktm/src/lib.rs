//! Block-tridiagonal Hamiltonians, their transfer matrices, and the exact
//! spectral identities connecting the two.
//!
//! A chain of `N` Hermitian blocks `H_n` (size `M`) coupled by invertible
//! blocks `L_n` defines an `NM x NM` Hamiltonian. The same data defines a
//! `2M x 2M` transfer matrix `T(E)` that propagates boundary values of the
//! eigenvalue recurrence across the chain, and a one-parameter family of
//! twisted (generally non-Hermitian) Hamiltonians `H(z)` implementing
//! generalized periodic boundary conditions. This crate builds all three
//! objects and verifies, numerically and overflow-safely, every identity
//! that ties their spectra together:
//!
//! - the factorized transfer product and its symplectic property,
//! - the representation of `T(E)` through corner blocks of the resolvent,
//! - the determinant duality between `det[T(E) - z]` and `det[E - H(z)]`,
//! - trace-of-resolvent identities and coupling relations between the open
//!   and twisted resolvents,
//! - Thouless-type sum rules for the characteristic exponents of `T(E)`
//!   and of `T(E)^dagger T(E)`, the latter realized as the transfer matrix
//!   of a doubled chain.
//!
//! Determinants are manipulated exclusively in (log-magnitude, phase) form
//! ([`numkernel::LogDet`]), so identities remain checkable far beyond the
//! range where raw determinants overflow.

pub mod chain;
pub mod duality;
pub mod error;
pub mod numkernel;
pub mod parallel;
pub mod qmat;
pub mod resolvent;
pub mod transfer;
pub mod verify;

pub use chain::{BlockChain, BoundaryKind, DenseHamiltonian, Ensemble};
pub use error::{Error, Result};
pub use numkernel::LogDet;

use num_complex::Complex64;

/// Dense complex matrix used throughout the crate.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dense complex vector.
pub type CVector = nalgebra::DVector<Complex64>;

/// Shorthand for a complex scalar.
#[inline]
pub fn cplx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
