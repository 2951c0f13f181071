#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

use hydrospec::contour::{DeformedContour, EscapeFamily, EscapeFunction};
use hydrospec::profile::{Domain, ProfileKind, ShearProfile};
use num_complex::Complex64;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub struct Case {
    pub name: String,
    pub profile: ShearProfile,
    pub contour: DeformedContour,
    pub alpha: f64,
}

fn segment_escape(family: EscapeFamily) -> EscapeFunction {
    EscapeFunction::new(family, 1.0, Domain::unit_segment()).unwrap()
}

/// `cos(0.7πx)` with `α = √6π/5` and the windowed sine deformation.
pub fn cos07(tau: f64) -> Case {
    Case {
        name: "cos(0.7πx)".into(),
        profile: ShearProfile::cosine(0.7 * PI),
        contour: DeformedContour::new(EscapeFunction::windowed_sine(0.7 * PI), tau).unwrap(),
        alpha: 6f64.sqrt() * PI / 5.0,
    }
}

/// `cos(ωx)` with `α = √(ω² - π²/4)`.
pub fn cosine(omega: f64, tau: f64) -> Case {
    Case {
        name: format!("cos({:.1}πx)", omega / PI),
        profile: ShearProfile::cosine(omega),
        contour: DeformedContour::new(EscapeFunction::windowed_sine(omega), tau).unwrap(),
        alpha: (omega * omega - PI * PI / 4.0).sqrt(),
    }
}

/// `sin(ωx + θ)` deformed by `-cos(ωs + θ) cos(πs/2)`.
pub fn trig(omega: f64, theta: f64, alpha: f64, tau: f64) -> Case {
    let kind = ProfileKind::Trig { omega, theta };
    let escape = segment_escape(EscapeFamily::Trig { omega, phase: theta - FRAC_PI_2, window: true });
    Case {
        name: format!("sin({:.1}πx+{theta:.2}), α={alpha:.4}", omega / PI),
        profile: ShearProfile::new(kind, Domain::unit_segment()).unwrap(),
        contour: DeformedContour::new(escape, tau).unwrap(),
        alpha,
    }
}

/// On-grid trig case: `α² = ω² - (πk/2)²`.
pub fn trig_resonant(omega: f64, theta: f64, k: u32, tau: f64) -> Case {
    let alpha = (omega * omega - (PI * k as f64 / 2.0).powi(2)).sqrt();
    trig(omega, theta, alpha, tau)
}

/// `cos(3πx)` with `α = √35π/2` and `m₀ = sin(3πs)`.
pub fn cos3pi(tau: f64) -> Case {
    let escape = segment_escape(EscapeFamily::Trig { omega: 3.0 * PI, phase: 0.0, window: false });
    Case {
        name: "cos(3πx)".into(),
        profile: ShearProfile::cosine(3.0 * PI),
        contour: DeformedContour::new(escape, tau).unwrap(),
        alpha: 35f64.sqrt() * PI / 2.0,
    }
}

pub fn couette(alpha: f64, tau: f64) -> Case {
    Case {
        name: format!("couette α={alpha}"),
        profile: ShearProfile::couette(),
        contour: DeformedContour::new(segment_escape(EscapeFamily::CouettePoiseuille { theta: 0.0 }), tau).unwrap(),
        alpha,
    }
}

pub fn couette_poiseuille(theta: f64, alpha: f64, tau: f64) -> Case {
    let kind = ProfileKind::CouettePoiseuille { theta };
    Case {
        name: format!("couette-poiseuille θ={theta} α={alpha}"),
        profile: ShearProfile::new(kind, Domain::unit_segment()).unwrap(),
        contour: DeformedContour::new(segment_escape(EscapeFamily::CouettePoiseuille { theta }), tau).unwrap(),
        alpha,
    }
}

/// `sin(3x)` on the circle with `m₀ = -cos(3s)`.
pub fn kolmogorov(alpha: f64, tau: f64) -> Case {
    let escape = EscapeFunction::new(
        EscapeFamily::Trig { omega: 3.0, phase: -FRAC_PI_2, window: false },
        1.0,
        Domain::standard_circle(),
    )
    .unwrap();
    Case {
        name: format!("sin(3x) α={alpha:.4}"),
        profile: ShearProfile::kolmogorov(3),
        contour: DeformedContour::new(escape, tau).unwrap(),
        alpha,
    }
}

fn orthonormalize(vs: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let mut out: Vec<Vec<Complex64>> = Vec::new();
    for v in vs {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let dot: Complex64 = q.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= dot * qi;
                }
            }
        }
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        out.push(w.iter().map(|z| z / norm).collect());
    }
    out
}

/// Sine of the largest principal angle between two subspaces of equal dimension.
pub fn subspace_angle(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
    let qa = orthonormalize(a);
    let qb = orthonormalize(b);
    // columns of (I - P_B) Q_A
    let m: Vec<Vec<Complex64>> = qa
        .iter()
        .map(|v| {
            let mut r = v.clone();
            for q in &qb {
                let dot: Complex64 = q.iter().zip(v).map(|(x, y)| x.conj() * y).sum();
                for (ri, qi) in r.iter_mut().zip(q) {
                    *ri -= dot * qi;
                }
            }
            r
        })
        .collect();
    let k = m.len();
    let gram: Vec<Vec<Complex64>> = (0..k)
        .map(|i| (0..k).map(|j| m[i].iter().zip(&m[j]).map(|(x, y)| x.conj() * y).sum()).collect())
        .collect();
    // power iteration for the largest eigenvalue of the Hermitian Gram matrix
    let mut x: Vec<Complex64> = (0..k).map(|i| c(1.0, 0.1 * i as f64)).collect();
    let mut lambda = 0.0;
    for _ in 0..200 {
        let y: Vec<Complex64> = (0..k).map(|i| (0..k).map(|j| gram[i][j] * x[j]).sum()).collect();
        let norm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        x = y.iter().map(|z| z / norm).collect();
    }
    lambda.sqrt()
}
