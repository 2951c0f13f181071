//! Thin helpers over `faer` dense matrices.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = Mat<Complex64>;

pub fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

pub fn real_to_complex(m: MatRef<'_, f64>) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| Complex64::new(m[(i, j)], 0.0))
}

/// `diag(d) · m`.
pub fn scale_rows(d: &[Complex64], m: &CMat) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| d[i] * m[(i, j)])
}

/// `m · diag(d)`.
pub fn scale_cols(m: &CMat, d: &[Complex64]) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * d[j])
}

pub fn diag(d: &[Complex64]) -> CMat {
    let n = d.len();
    Mat::from_fn(n, n, |i, j| if i == j { d[i] } else { zero() })
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { Complex64::new(1.0, 0.0) } else { zero() })
}

/// Rows and columns `1..n-1` of a square matrix.
pub fn interior(m: &CMat) -> CMat {
    let n = m.nrows();
    Mat::from_fn(n - 2, n - 2, |i, j| m[(i + 1, j + 1)])
}

pub fn add_diagonal(m: &CMat, shift: Complex64) -> CMat {
    let mut out = m.clone();
    for i in 0..m.nrows().min(m.ncols()) {
        out[(i, i)] += shift;
    }
    out
}

pub fn matvec(m: &CMat, v: &[Complex64]) -> Vec<Complex64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

pub fn column(m: &CMat, j: usize) -> Vec<Complex64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

pub fn norm1(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn frobenius(m: &CMat) -> f64 {
    m.norm_l2()
}

pub fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn all_finite(m: &CMat) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].re.is_finite() && m[(i, j)].im.is_finite()))
}

/// Inverse with a 1-norm condition estimate; fails when the matrix is numerically singular.
pub struct Inverse {
    pub inverse: CMat,
    pub condition: f64,
}

pub const SINGULAR_CONDITION: f64 = 1e14;

pub fn invert(m: &CMat, context: &'static str) -> Result<Inverse> {
    let n = m.nrows();
    let lu = m.partial_piv_lu();
    let inverse = lu.solve(identity(n));
    let condition = if all_finite(&inverse) { norm1(m) * norm1(&inverse) } else { f64::INFINITY };
    if !condition.is_finite() || condition > SINGULAR_CONDITION {
        return Err(Error::Singular { context, condition });
    }
    Ok(Inverse { inverse, condition })
}

/// Solves `m x = rhs` for a single right-hand side.
pub fn solve(m: &CMat, rhs: &[Complex64], context: &'static str) -> Result<Vec<Complex64>> {
    let inv = invert(m, context)?;
    Ok(matvec(&inv.inverse, rhs))
}
