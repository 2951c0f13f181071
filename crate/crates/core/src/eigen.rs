//! Dense non-Hermitian eigenproblems on top of `faer`, plus selection helpers.

use faer::Mat;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SpectrumMeta {
    pub n: Option<usize>,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub tau: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    /// Unit-norm right eigenvectors as columns, aligned with `eigenvalues`.
    pub eigenvectors: Option<CMat>,
    /// `‖A v - λ B v‖ / ‖v‖` per pair; empty unless eigenvectors were requested.
    pub residuals: Vec<f64>,
    pub meta: SpectrumMeta,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvector(&self, i: usize) -> Option<Vec<Complex64>> {
        self.eigenvectors.as_ref().map(|v| linalg::column(v, i))
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }

    pub fn with_meta(mut self, meta: SpectrumMeta) -> Self {
        self.meta = meta;
        self
    }

    /// Index and value of the eigenvalue nearest to `target`.
    pub fn nearest(&self, target: Complex64) -> Option<(usize, Complex64)> {
        self.eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - target).norm().total_cmp(&(b.1 - target).norm()))
            .map(|(i, &z)| (i, z))
    }
}

fn check_square(m: &CMat, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidArgument(format!("{what} must be square, got {}x{}", m.nrows(), m.ncols())));
    }
    if !linalg::all_finite(m) {
        return Err(Error::InvalidArgument(format!("{what} has non-finite entries")));
    }
    Ok(())
}

fn decompose(m: &CMat, vectors: bool) -> Result<(Vec<Complex64>, Option<CMat>)> {
    if m.nrows() == 0 {
        return Ok((Vec::new(), vectors.then(|| Mat::zeros(0, 0))));
    }
    let non_convergence = |_| Error::EigenNonConvergence(m.nrows());
    if vectors {
        let evd = m.eigen().map_err(non_convergence)?;
        let values: Vec<Complex64> = evd.S().column_vector().iter().cloned().collect();
        let mut v = evd.U().to_owned();
        for j in 0..v.ncols() {
            let norm = (0..v.nrows()).map(|i| v[(i, j)].norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.0 {
                for i in 0..v.nrows() {
                    v[(i, j)] /= norm;
                }
            }
        }
        Ok((values, Some(v)))
    } else {
        Ok((m.eigenvalues().map_err(non_convergence)?, None))
    }
}

fn residuals(a: &CMat, b: Option<&CMat>, values: &[Complex64], v: &CMat) -> Vec<f64> {
    let av = a * v;
    let bv = b.map(|b| b * v);
    (0..values.len())
        .map(|j| {
            let r: f64 = (0..v.nrows())
                .map(|i| {
                    let bvij = match &bv {
                        Some(bv) => bv[(i, j)],
                        None => v[(i, j)],
                    };
                    (av[(i, j)] - values[j] * bvij).norm_sqr()
                })
                .sum::<f64>()
                .sqrt();
            r / linalg::vec_norm(&linalg::column(v, j)).max(f64::MIN_POSITIVE)
        })
        .collect()
}

/// All eigenvalues of `m`, with unit right eigenvectors and residuals when `vectors` is set.
pub fn eig(m: &CMat, vectors: bool) -> Result<Spectrum> {
    check_square(m, "matrix")?;
    let (eigenvalues, eigenvectors) = decompose(m, vectors)?;
    let residuals = eigenvectors.as_ref().map(|v| residuals(m, None, &eigenvalues, v)).unwrap_or_default();
    Ok(Spectrum { eigenvalues, eigenvectors, residuals, meta: SpectrumMeta::default() })
}

/// Eigenvalues of the pencil `(A, B)` through `B^{-1} A`; residuals are taken on the pencil itself.
pub fn eig_pencil(a: &CMat, b: &CMat, vectors: bool) -> Result<Spectrum> {
    check_square(a, "A")?;
    check_square(b, "B")?;
    if a.nrows() != b.nrows() {
        return Err(Error::InvalidArgument("A and B must have the same shape".into()));
    }
    let b_inv = linalg::invert(b, "eig_pencil B")?.inverse;
    let m = &b_inv * a;
    let (eigenvalues, eigenvectors) = decompose(&m, vectors)?;
    let residuals = eigenvectors.as_ref().map(|v| residuals(a, Some(b), &eigenvalues, v)).unwrap_or_default();
    Ok(Spectrum { eigenvalues, eigenvectors, residuals, meta: SpectrumMeta::default() })
}

/// Indices of the eigenvalues within `radius` of `center`; the count estimates multiplicity.
pub fn cluster(values: &[Complex64], center: Complex64, radius: f64) -> (usize, Vec<usize>) {
    let members: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, z)| (*z - center).norm() <= radius)
        .map(|(i, _)| i)
        .collect();
    (members.len(), members)
}

/// Greedy nearest pairing of two multisets: pairs are taken in order of increasing distance.
///
/// Returns `(i, j, |a_i - b_j|)` triples; unmatched elements of the longer list are dropped.
pub fn match_spectra(a: &[Complex64], b: &[Complex64]) -> Vec<(usize, usize, f64)> {
    let mut pairs: Vec<(usize, usize, f64)> = a
        .iter()
        .enumerate()
        .flat_map(|(i, x)| b.iter().enumerate().map(move |(j, y)| (i, j, (x - y).norm())))
        .collect();
    pairs.sort_by(|p, q| p.2.total_cmp(&q.2));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    for (i, j, d) in pairs {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            out.push((i, j, d));
        }
    }
    out
}

/// Largest pairing distance, or infinity when the sizes differ.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    match_spectra(a, b).iter().map(|p| p.2).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn real_diag(d: &[f64]) -> CMat {
        linalg::diag(&d.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>())
    }

    #[test]
    fn identity_and_diagonal() {
        let s = eig(&linalg::identity(5), true).unwrap();
        assert_eq!(s.len(), 5);
        assert!(s.eigenvalues.iter().all(|z| (z - c(1.0, 0.0)).norm() < 1e-14));
        assert!(s.max_residual() < 1e-14);
        let s = eig(&real_diag(&[1.0, 2.0, 3.0]), false).unwrap();
        assert!(multiset_distance(&s.eigenvalues, &[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]) < 1e-14);
        assert!(s.residuals.is_empty());
    }

    #[test]
    fn companion_of_z2_plus_1() {
        let m = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => c(-1.0, 0.0),
            (1, 0) => c(1.0, 0.0),
            _ => c(0.0, 0.0),
        });
        let s = eig(&m, true).unwrap();
        assert!(multiset_distance(&s.eigenvalues, &[c(0.0, 1.0), c(0.0, -1.0)]) < 1e-14);
        assert!(s.max_residual() < 1e-13);
    }

    #[test]
    fn pencil_examples() {
        let s = eig_pencil(&real_diag(&[2.0, 4.0]), &real_diag(&[1.0, 2.0]), true).unwrap();
        assert!(multiset_distance(&s.eigenvalues, &[c(2.0, 0.0), c(2.0, 0.0)]) < 1e-14);
        let a = Mat::from_fn(4, 4, |i, j| c((i * 3 + j) as f64 * 0.1, (i as f64 - j as f64).sin()));
        let direct = eig(&a, false).unwrap();
        let pencil = eig_pencil(&a, &linalg::identity(4), true).unwrap();
        assert!(multiset_distance(&direct.eigenvalues, &pencil.eigenvalues) < 1e-10);
        assert!(pencil.max_residual() < 1e-8 * linalg::frobenius(&a));
    }

    #[test]
    fn singular_b_is_rejected() {
        let b = real_diag(&[1.0, 0.0]);
        assert!(matches!(eig_pencil(&linalg::identity(2), &b, false), Err(Error::Singular { .. })));
        let rect = Mat::<Complex64>::zeros(2, 3);
        assert!(eig(&rect, false).is_err());
    }

    #[test]
    fn clustering() {
        let v = [c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)];
        assert_eq!(cluster(&v, c(0.0, 0.0), 0.5).0, 1);
        assert_eq!(cluster(&[], c(0.0, 0.0), 0.5).0, 0);
        assert_eq!(cluster(&v, c(1.5, 0.0), 0.6), (2, vec![1, 2]));
    }

    #[test]
    fn greedy_matching_is_order_free() {
        let a = [c(0.0, 0.0), c(1.0, 1.0), c(-2.0, 0.5)];
        let b = [c(-2.0, 0.5 + 1e-12), c(0.0, 0.0), c(1.0, 1.0)];
        assert!(multiset_distance(&a, &b) < 1e-11);
        assert_eq!(multiset_distance(&a, &b[..2]), f64::INFINITY);
    }
}
