//! Complex log-determinants in (log-magnitude, phase) form.
//!
//! Every determinant identity in this crate is compared through [`LogDet`]
//! values rather than raw determinants: a product of a few hundred factors
//! of modest size already overflows `f64`, while its log-magnitude stays
//! around a few thousand.

use crate::error::{Error, Result};
use crate::CMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Pivot magnitudes below this are treated as an exactly singular matrix.
const SINGULAR_PIVOT: f64 = 1e-300;

/// Reduces an angle to the interval `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let mut a = x % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// A complex determinant stored as `det = exp(log_mag + i * phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    /// Natural log of `|det|`.
    pub log_mag: f64,
    /// Argument of `det`, in `(-pi, pi]`.
    pub phase: f64,
}

impl LogDet {
    /// The determinant 1.
    pub fn one() -> Self {
        LogDet { log_mag: 0.0, phase: 0.0 }
    }

    /// Log-determinant of a 1x1 determinant `w`.
    pub fn from_complex(w: Complex64) -> Self {
        LogDet { log_mag: w.norm().ln(), phase: w.arg() }
    }

    /// Log of a positive real factor.
    pub fn from_positive(x: f64) -> Self {
        LogDet { log_mag: x.ln(), phase: 0.0 }
    }

    /// The represented determinant, when it fits in an `f64`.
    pub fn to_complex(self) -> Complex64 {
        Complex64::from_polar(self.log_mag.exp(), self.phase)
    }

    /// Determinant of a product: logs add, phase wrapped.
    pub fn mul(self, other: LogDet) -> Self {
        LogDet {
            log_mag: self.log_mag + other.log_mag,
            phase: wrap_angle(self.phase + other.phase),
        }
    }

    /// Determinant of a quotient.
    pub fn div(self, other: LogDet) -> Self {
        LogDet {
            log_mag: self.log_mag - other.log_mag,
            phase: wrap_angle(self.phase - other.phase),
        }
    }

    /// Integer power.
    pub fn powi(self, n: i32) -> Self {
        LogDet {
            log_mag: self.log_mag * f64::from(n),
            phase: wrap_angle(self.phase * f64::from(n)),
        }
    }

    /// Determinant of the adjoint (complex conjugate).
    pub fn conj(self) -> Self {
        LogDet { log_mag: self.log_mag, phase: wrap_angle(-self.phase) }
    }

    /// `|log|det_a| - log|det_b||` — magnitude disagreement of two determinants.
    pub fn mag_distance(self, other: LogDet) -> f64 {
        (self.log_mag - other.log_mag).abs()
    }

    /// Phase disagreement modulo `2 pi`.
    pub fn phase_distance(self, other: LogDet) -> f64 {
        wrap_angle(self.phase - other.phase).abs()
    }
}

/// Log-determinant of a square complex matrix by partially pivoted
/// elimination, accumulating `ln|pivot|` and `arg(pivot)` factor by factor.
///
/// Returns [`Error::SingularMatrix`] when a pivot underflows; the caller
/// decides whether that means "resolvent at an eigenvalue" or bad input.
pub fn logdet(a: &CMatrix) -> Result<LogDet> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "logdet needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if n == 0 {
        return Ok(LogDet::one());
    }
    let mut w = a.clone();
    let mut log_mag = 0.0_f64;
    let mut phase = 0.0_f64;
    let mut swaps = 0usize;
    for k in 0..n {
        // partial pivoting on column k
        let mut piv = k;
        let mut best = w[(k, k)].norm_sqr();
        for r in (k + 1)..n {
            let v = w[(r, k)].norm_sqr();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if piv != k {
            w.swap_rows(piv, k);
            swaps += 1;
        }
        let pivot = w[(k, k)];
        let mag = pivot.norm();
        if !(mag > SINGULAR_PIVOT) {
            return Err(Error::SingularMatrix);
        }
        log_mag += mag.ln();
        phase = wrap_angle(phase + pivot.arg());
        for r in (k + 1)..n {
            let factor = w[(r, k)] / pivot;
            if factor.norm_sqr() == 0.0 {
                continue;
            }
            for c in (k + 1)..n {
                let delta = factor * w[(k, c)];
                w[(r, c)] -= delta;
            }
        }
    }
    if swaps % 2 == 1 {
        phase = wrap_angle(phase + PI);
    }
    Ok(LogDet { log_mag, phase })
}
