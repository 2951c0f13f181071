//! Fourier collocation of the deformed Rayleigh operator on the circle `ℝ/2πℤ`.
//!
//! Everything acts on coefficient vectors `ĉ = F f`, where `f` holds samples at
//! `x_j = 2πj/N` and `F_{kj} = e^{-i k x_j}/√N` is unitary. Before any
//! assembly the derivative is checked against analytic probes.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;

use crate::contour::DeformedContour;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::profile::ShearProfile;

/// Human-readable statement of the transform and derivative conventions in use.
pub const CONVENTION: &str =
    "coefficients c_k = N^{-1/2} sum_j f(2 pi j/N) e^{-i k x_j}, k in (0..N/2-1, -N/2..-1); D = F diag(1/gamma') F^{-1} diag(i k); L = D^2 - alpha^2";

#[derive(Clone, Debug)]
pub struct FourierGrid {
    pub n: usize,
    pub x: Vec<f64>,
    pub k: Vec<f64>,
    /// Samples to coefficients.
    pub forward: CMat,
    /// Coefficients to samples.
    pub inverse: CMat,
}

impl FourierGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || n % 2 == 1 {
            return Err(Error::InvalidArgument(format!("Fourier grid needs an even N >= 4, got {n}")));
        }
        let x: Vec<f64> = (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
        let half = n as i64 / 2;
        let k: Vec<f64> = (0..n as i64).map(|j| if j < half { j } else { j - n as i64 } as f64).collect();
        let scale = 1.0 / (n as f64).sqrt();
        // k x_j is reduced mod 2π through integer arithmetic for accuracy
        let phase = |kk: f64, j: usize| {
            let m = ((kk as i64 * j as i64).rem_euclid(n as i64)) as f64;
            2.0 * PI * m / n as f64
        };
        let forward = Mat::from_fn(n, n, |r, j| Complex64::from_polar(scale, -phase(k[r], j)));
        let inverse = Mat::from_fn(n, n, |j, r| Complex64::from_polar(scale, phase(k[r], j)));
        Ok(FourierGrid { n, x, k, forward, inverse })
    }

    pub fn to_coefficients(&self, samples: &[Complex64]) -> Vec<Complex64> {
        linalg::matvec(&self.forward, samples)
    }

    pub fn to_samples(&self, coefficients: &[Complex64]) -> Vec<Complex64> {
        linalg::matvec(&self.inverse, coefficients)
    }

    /// `M_f = F diag(f_j) F^{-1}`.
    pub fn multiplication(&self, f: &[Complex64]) -> CMat {
        &self.forward * linalg::scale_rows(f, &self.inverse)
    }
}

/// `F diag(1/γ'(x_j)) F^{-1} diag(i k)`: the derivative along the contour in coefficient space.
pub fn fourier_deformed_d(grid: &FourierGrid, contour: &DeformedContour) -> Result<CMat> {
    if !contour.domain().is_circle() {
        return Err(Error::InvalidArgument("Fourier discretization needs a circle contour".into()));
    }
    let inv_dgamma = grid
        .x
        .iter()
        .map(|&x| {
            let dg = contour.dgamma(x);
            if dg.norm() < 1e-14 {
                Err(Error::numerical("fourier_deformed_d", format!("γ' vanishes at x = {x}")))
            } else {
                Ok(dg.inv())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let ik: Vec<Complex64> = grid.k.iter().map(|&k| Complex64::new(0.0, k)).collect();
    let inner = linalg::scale_cols(&linalg::scale_rows(&inv_dgamma, &grid.inverse), &ik);
    Ok(&grid.forward * inner)
}

/// Analytic probes for the undeformed derivative: constants, `e^{±ix}` and `e^{3ix}`.
pub fn convention_self_test(grid: &FourierGrid) -> Result<()> {
    let flat = DeformedContour::undeformed(crate::profile::Domain::standard_circle());
    let d = fourier_deformed_d(grid, &flat)?;
    for (m, expected) in [(0i32, 0.0), (1, 1.0), (-1, -1.0), (3, 3.0)] {
        let samples: Vec<Complex64> = grid.x.iter().map(|&x| Complex64::from_polar(1.0, m as f64 * x)).collect();
        let coeffs = grid.to_coefficients(&samples);
        let out = linalg::matvec(&d, &coeffs);
        let err = out
            .iter()
            .zip(&coeffs)
            .map(|(o, c)| (o - c * Complex64::new(0.0, expected)).norm())
            .fold(0.0, f64::max);
        if err > 1e-9 {
            return Err(Error::numerical(
                "convention_self_test",
                format!("derivative of e^({m}ix) off by {err:e}"),
            ));
        }
    }
    Ok(())
}

/// Shared pieces of the circle discretization for one `(profile, contour, α, N)`.
pub struct CircleDisc {
    pub profile: ShearProfile,
    pub contour: DeformedContour,
    pub alpha: f64,
    pub alpha_c: f64,
    pub grid: FourierGrid,
    pub d: CMat,
    /// `D² - α²` in coefficient space, with its inverse.
    pub lap: CMat,
    pub lap_inv: CMat,
    pub gamma: Vec<Complex64>,
    pub dgamma: Vec<Complex64>,
    pub u: Vec<Complex64>,
    pub u2: Vec<Complex64>,
}

impl CircleDisc {
    pub fn new(profile: &ShearProfile, contour: &DeformedContour, alpha: f64, n: usize) -> Result<Self> {
        if !profile.domain.is_circle() || !contour.domain().is_circle() {
            return Err(Error::InvalidArgument("circle discretization needs a circle domain".into()));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be > 0, got {alpha}")));
        }
        let grid = FourierGrid::new(n)?;
        convention_self_test(&grid)?;
        let d = fourier_deformed_d(&grid, contour)?;
        let alpha_c = alpha * profile.domain.scale();
        let lap = linalg::add_diagonal(&(&d * &d), Complex64::new(-alpha_c * alpha_c, 0.0));
        let lap_inv = linalg::invert(&lap, "circle Laplacian")?.inverse;
        let gamma: Vec<Complex64> = grid.x.iter().map(|&x| contour.gamma(x)).collect();
        let dgamma: Vec<Complex64> = grid.x.iter().map(|&x| contour.dgamma(x)).collect();
        let u = gamma.iter().map(|&z| profile.eval_canonical(z, 0)).collect();
        let u2 = gamma.iter().map(|&z| profile.eval_canonical(z, 2)).collect();
        Ok(CircleDisc {
            profile: profile.clone(),
            contour: *contour,
            alpha,
            alpha_c,
            grid,
            d,
            lap,
            lap_inv,
            gamma,
            dgamma,
            u,
            u2,
        })
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    /// `(iε²/α) L + M_U - M_{U''} L^{-1}` at physical `epsilon`.
    pub fn q(&self, epsilon: f64) -> Result<CMat> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be >= 0, got {epsilon}")));
        }
        let m_u = self.grid.multiplication(&self.u);
        let m_u2 = self.grid.multiplication(&self.u2);
        let mut q = m_u - m_u2 * &self.lap_inv;
        let eps_c2 = epsilon * epsilon / self.profile.domain.scale();
        if eps_c2 > 0.0 {
            let coef = Complex64::new(0.0, eps_c2 / self.alpha_c);
            q += linalg::scale_rows(&vec![coef; self.n()], &self.lap);
        }
        Ok(q)
    }

    /// Samples along the contour of `ψ = L^{-1} u` for a coefficient-space eigenvector `u`.
    pub fn stream_function(&self, eigenvector: &[Complex64]) -> Vec<Complex64> {
        self.grid.to_samples(&linalg::matvec(&self.lap_inv, eigenvector))
    }
}

pub fn assemble_q_circle(
    profile: &ShearProfile,
    contour: &DeformedContour,
    alpha: f64,
    epsilon: f64,
    n: usize,
) -> Result<CMat> {
    CircleDisc::new(profile, contour, alpha, n)?.q(epsilon)
}
