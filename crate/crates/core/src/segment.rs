//! Chebyshev collocation of the deformed Rayleigh and Orr–Sommerfeld operators
//! on the canonical segment `[-1, 1]`.
//!
//! Operator compositions are discretized as products of differentiation
//! matrices. The Dirichlet block keeps interior nodes `1..N`; the clamped
//! bilaplacian uses the `(1 - γ²) q` substitution so that both Dirichlet and
//! Neumann conditions hold at the fixed endpoints.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;
use serde::Serialize;

use crate::contour::DeformedContour;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, Inverse};
use crate::profile::ShearProfile;
use crate::quadrature::{clenshaw_curtis, ChebInterpolant};

pub const DEFAULT_N: usize = 64;

#[derive(Clone, Debug)]
pub struct ChebGrid {
    pub n: usize,
    /// `x_j = cos(jπ/N)`, so `x_0 = 1` and `x_N = -1`.
    pub x: Vec<f64>,
    pub d: Mat<f64>,
}

/// Chebyshev differentiation matrix on `N + 1` points with the negative-sum diagonal.
pub(crate) fn cheb_matrix(n: usize) -> (Vec<f64>, Mat<f64>) {
    assert!(n >= 1);
    let x: Vec<f64> = (0..=n).map(|j| (PI * j as f64 / n as f64).cos()).collect();
    let c = |j: usize| {
        let base = if j == 0 || j == n { 2.0 } else { 1.0 };
        if j % 2 == 0 {
            base
        } else {
            -base
        }
    };
    let mut d = Mat::from_fn(n + 1, n + 1, |i, j| {
        if i == j {
            0.0
        } else {
            c(i) / c(j) / (x[i] - x[j])
        }
    });
    for i in 0..=n {
        let off: f64 = (0..=n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -off;
    }
    (x, d)
}

pub fn cheb_grid(n: usize) -> Result<ChebGrid> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("Chebyshev grid needs N >= 2, got {n}")));
    }
    let (x, d) = cheb_matrix(n);
    Ok(ChebGrid { n, x, d })
}

/// `D_τ = diag(1/γ_τ'(x_j)) D` on the full grid.
pub fn deform_d(grid: &ChebGrid, contour: &DeformedContour) -> Result<CMat> {
    let inv_dgamma = grid
        .x
        .iter()
        .map(|&x| {
            let dg = contour.dgamma(x);
            if dg.norm() < 1e-14 {
                Err(Error::numerical("deform_d", format!("γ' vanishes at x = {x}")))
            } else {
                Ok(dg.inv())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(linalg::scale_rows(&inv_dgamma, &linalg::real_to_complex(grid.d.as_ref())))
}

/// Dirichlet block of `D_τ² - α²`, with its inverse.
pub struct Helmholtz {
    pub matrix: CMat,
    pub inverse: CMat,
    pub condition: f64,
}

pub fn helmholtz_dirichlet(d_tau: &CMat, alpha: f64) -> Result<Helmholtz> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be > 0, got {alpha}")));
    }
    let d2 = linalg::interior(&(d_tau * d_tau));
    let matrix = linalg::add_diagonal(&d2, Complex64::new(-alpha * alpha, 0.0));
    let Inverse { inverse, condition } = linalg::invert(&matrix, "helmholtz_dirichlet")?;
    Ok(Helmholtz { matrix, inverse, condition })
}

/// Applies the explicit sinh kernel of `(∂² - α²)^{-1}` with Dirichlet conditions on `[-1, 1]`.
///
/// `f` holds samples at all `N + 1` Chebyshev points; the partial integrals use
/// Clenshaw–Curtis on each sub-interval with the polynomial interpolant of `f`.
pub fn greens_oracle(alpha: f64, f: &[Complex64], grid: &ChebGrid) -> Vec<Complex64> {
    assert_eq!(f.len(), grid.n + 1);
    let interp = ChebInterpolant::new(f);
    let m = 2 * grid.n + 16;
    let denom = alpha * (2.0 * alpha).sinh();
    grid.x
        .iter()
        .map(|&x| {
            let right = if x < 1.0 {
                clenshaw_curtis(x, 1.0, m, |t| interp.eval(t) * (alpha * (1.0 - t)).sinh())
            } else {
                Complex64::new(0.0, 0.0)
            };
            let left = if x > -1.0 {
                clenshaw_curtis(-1.0, x, m, |t| interp.eval(t) * (alpha * (t + 1.0)).sinh())
            } else {
                Complex64::new(0.0, 0.0)
            };
            -(right * (alpha * (x + 1.0)).sinh() + left * (alpha * (1.0 - x)).sinh()) / denom
        })
        .collect()
}

/// Interior block of `(diag(1-γ²) D_τ⁴ - 8 diag(γ) D_τ³ - 12 D_τ²) · diag(0, 1/(1-γ²), 0)`.
pub fn clamped_bilaplacian(d_tau: &CMat, contour: &DeformedContour, grid: &ChebGrid) -> CMat {
    let n = grid.n;
    let gamma: Vec<Complex64> = grid.x.iter().map(|&x| contour.gamma(x)).collect();
    let one = Complex64::new(1.0, 0.0);
    let d2 = d_tau * d_tau;
    let d3 = &d2 * d_tau;
    let d4 = &d2 * &d2;
    let w: Vec<Complex64> = gamma.iter().map(|g| one - g * g).collect();
    let outer = Mat::from_fn(n + 1, n + 1, |i, j| {
        w[i] * d4[(i, j)] - gamma[i] * d3[(i, j)] * 8.0 - d2[(i, j)] * 12.0
    });
    let s: Vec<Complex64> = (1..n).map(|j| (one - gamma[j] * gamma[j]).inv()).collect();
    linalg::scale_cols(&linalg::interior(&outer), &s)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PencilMeta {
    pub n: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub tau: f64,
    pub profile: String,
    pub contour: String,
}

/// Dense pair `(A, B)` on the interior nodes; generalized eigenvalues approximate `Σ_ε`.
#[derive(Clone, Debug)]
pub struct DiscretePencil {
    pub a: CMat,
    pub b: CMat,
    pub meta: PencilMeta,
}

/// Shared pieces of the segment discretization for one `(profile, contour, α, N)`.
pub struct SegmentDisc {
    pub profile: ShearProfile,
    pub contour: DeformedContour,
    /// `α` in physical units.
    pub alpha: f64,
    /// `α` after the change of variable to `[-1, 1]`.
    pub alpha_c: f64,
    pub grid: ChebGrid,
    pub d_tau: CMat,
    pub gamma: Vec<Complex64>,
    pub dgamma: Vec<Complex64>,
    pub helmholtz: Helmholtz,
    /// `U(γ(x_j))`, `U''(γ(x_j))` (canonical) on interior nodes.
    pub u: Vec<Complex64>,
    pub u2: Vec<Complex64>,
}

impl SegmentDisc {
    pub fn new(profile: &ShearProfile, contour: &DeformedContour, alpha: f64, n: usize) -> Result<Self> {
        if profile.domain.is_circle() || contour.domain().is_circle() {
            return Err(Error::InvalidArgument("segment discretization needs a segment domain".into()));
        }
        if n < 4 {
            return Err(Error::InvalidArgument(format!("segment discretization needs N >= 4, got {n}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be > 0, got {alpha}")));
        }
        let grid = cheb_grid(n)?;
        let d_tau = deform_d(&grid, contour)?;
        let alpha_c = alpha * profile.domain.scale();
        let helmholtz = helmholtz_dirichlet(&d_tau, alpha_c)?;
        let gamma: Vec<Complex64> = grid.x.iter().map(|&x| contour.gamma(x)).collect();
        let dgamma: Vec<Complex64> = grid.x.iter().map(|&x| contour.dgamma(x)).collect();
        let u = gamma[1..n].iter().map(|&z| profile.eval_canonical(z, 0)).collect();
        let u2 = gamma[1..n].iter().map(|&z| profile.eval_canonical(z, 2)).collect();
        Ok(SegmentDisc {
            profile: profile.clone(),
            contour: *contour,
            alpha,
            alpha_c,
            grid,
            d_tau,
            gamma,
            dgamma,
            helmholtz,
            u,
            u2,
        })
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    /// `diag(U) - diag(U'') (D_τ² - α²)_D^{-1}`.
    pub fn rayleigh_q(&self) -> CMat {
        let m = self.n() - 1;
        let scaled = linalg::scale_rows(&self.u2, &self.helmholtz.inverse);
        Mat::from_fn(m, m, |i, j| {
            let d = if i == j { self.u[i] } else { Complex64::new(0.0, 0.0) };
            d - scaled[(i, j)]
        })
    }

    /// Orr–Sommerfeld pencil at physical viscosity parameter `epsilon`.
    pub fn pencil(&self, epsilon: f64) -> Result<DiscretePencil> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be >= 0, got {epsilon}")));
        }
        let m = self.n() - 1;
        let alpha2 = self.alpha_c * self.alpha_c;
        let b = self.helmholtz.matrix.clone();
        // U(γ)(D² - α²) - U''(γ)
        let mut a = linalg::scale_rows(&self.u, &b);
        for i in 0..m {
            a[(i, i)] -= self.u2[i];
        }
        let eps_c2 = epsilon * epsilon / self.profile.domain.scale();
        if eps_c2 > 0.0 {
            let d4 = clamped_bilaplacian(&self.d_tau, &self.contour, &self.grid);
            let d2 = linalg::interior(&(&self.d_tau * &self.d_tau));
            let coef = Complex64::new(0.0, eps_c2 / self.alpha_c);
            for i in 0..m {
                for j in 0..m {
                    let mut v = d4[(i, j)] - d2[(i, j)] * (2.0 * alpha2);
                    if i == j {
                        v += alpha2 * alpha2;
                    }
                    a[(i, j)] += coef * v;
                }
            }
        }
        Ok(DiscretePencil {
            a,
            b,
            meta: PencilMeta {
                n: self.n(),
                alpha: self.alpha,
                epsilon,
                tau: self.contour.tau,
                profile: self.profile.id(),
                contour: self.contour.id(),
            },
        })
    }

    /// Canonical derivative along the contour of samples on the full grid.
    pub fn differentiate(&self, full: &[Complex64]) -> Vec<Complex64> {
        linalg::matvec(&self.d_tau, full)
    }
}

pub fn assemble_os_pencil(
    profile: &ShearProfile,
    contour: &DeformedContour,
    alpha: f64,
    epsilon: f64,
    n: usize,
) -> Result<DiscretePencil> {
    SegmentDisc::new(profile, contour, alpha, n)?.pencil(epsilon)
}

pub fn assemble_rayleigh_q(profile: &ShearProfile, contour: &DeformedContour, alpha: f64, n: usize) -> Result<CMat> {
    Ok(SegmentDisc::new(profile, contour, alpha, n)?.rayleigh_q())
}

/// Samples of the curve `{U(γ_τ(s))}` on a uniform parameter grid.
pub fn ellipticity_samples(profile: &ShearProfile, contour: &DeformedContour, samples: usize) -> Vec<Complex64> {
    contour
        .sample_grid(samples.max(2))
        .into_iter()
        .map(|s| profile.eval_canonical(contour.gamma(s), 0))
        .collect()
}
