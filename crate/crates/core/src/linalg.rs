//! Thin helpers over `nalgebra` for complex matrices.

use alloc::format;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
// std inherents shadow these when a dependency links std
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;

use crate::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;
pub type RMat = DMatrix<f64>;

/// `exp(j * phase)`.
#[inline]
pub fn cis(phase: f64) -> Complex64 {
    let (s, c) = phase.sin_cos();
    Complex64::new(c, s)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let s = a[(i, j)];
            if s.is_zero() {
                continue;
            }
            for q in 0..bc {
                for p in 0..br {
                    out[(i * br + p, j * bc + q)] = s * b[(p, q)];
                }
            }
        }
    }
    out
}

/// Column-major vectorization (`nalgebra` storage order).
pub fn vec_col_major(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

pub fn unvec_col_major(v: &CVec, rows: usize, cols: usize) -> Result<CMat> {
    if v.len() != rows * cols {
        return Err(Error::invalid(format!(
            "cannot reshape vector of length {} into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(CMat::from_column_slice(rows, cols, v.as_slice()))
}

pub fn frobenius_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Solves `g x = rhs` for a Hermitian positive (semi)definite `g`.
///
/// Cholesky first; a failed factorization falls back to partial-pivot LU, and a
/// numerically singular pivot is reported as [`Error::SingularSystem`].
pub fn solve_hermitian(g: &CMat, rhs: &CMat) -> Result<CMat> {
    let n = g.nrows();
    if g.ncols() != n || rhs.nrows() != n {
        return Err(Error::invalid("solve_hermitian: dimension mismatch"));
    }
    let scale = (0..n).map(|i| g[(i, i)].norm()).fold(0.0, f64::max);
    if let Some(ch) = g.clone().cholesky() {
        let l = ch.l_dirty();
        let min_diag = (0..n).map(|i| l[(i, i)].re).fold(f64::INFINITY, f64::min);
        if min_diag * min_diag > scale * 1e-13 {
            return Ok(ch.solve(rhs));
        }
    }
    let lu = g.clone().lu();
    let u = lu.u();
    let min_pivot = (0..n).map(|i| u[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    if !(min_pivot > scale * 1e-13) {
        return Err(Error::SingularSystem(format!(
            "pivot {min_pivot:e} against scale {scale:e}"
        )));
    }
    lu.solve(rhs)
        .ok_or_else(|| Error::SingularSystem("LU solve failed".into()))
}

/// Least-squares solution of `a x ≈ b` through a thin QR factorization.
pub fn least_squares(a: &CMat, b: &CVec) -> Result<CVec> {
    if a.nrows() != b.len() {
        return Err(Error::invalid("least_squares: dimension mismatch"));
    }
    if a.ncols() == 0 {
        return Ok(CVec::zeros(0));
    }
    if a.nrows() < a.ncols() {
        return Err(Error::invalid("least_squares: underdetermined system"));
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let qtb = qr.q().adjoint() * b;
    let scale = (0..r.ncols()).map(|i| r[(i, i)].norm()).fold(0.0, f64::max);
    for i in 0..r.ncols() {
        if !(r[(i, i)].norm() > scale * 1e-12) {
            return Err(Error::SingularSystem("rank-deficient least squares".into()));
        }
    }
    r.solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::SingularSystem("triangular solve failed".into()))
}
