//! Viscous perturbations of resonances: continuation of `c(ε)` through the
//! Orr–Sommerfeld spectrum, Taylor fits, and closed-form leading coefficients.
//!
//! On the segment `c(ε) = c₁ + ċ(0) ε + O(ε²)`, with `ċ(0)` produced by the
//! boundary layers at both walls. On the circle there are no boundary layers
//! and the expansion only contains even powers, `c(ε) = c₁ + c̃ ε² + O(ε⁴)`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circle::CircleDisc;
use crate::contour::DeformedContour;
use crate::eigen::{self, Spectrum};
use crate::error::{Error, Result};
use crate::linalg;
use crate::profile::ShearProfile;
use crate::quadrature::{clenshaw_curtis_weights, principal_value};
use crate::resonance::DEFAULT_CLUSTER_RADIUS;
use crate::segment::SegmentDisc;

/// Relative size under which a denominator is treated as vanishing.
pub const DENOMINATOR_MARGIN: f64 = 1e-10;
pub const JUMP_FACTOR: f64 = 5.0;
pub const MAX_BISECTIONS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryConstants {
    pub lambda: Complex64,
    pub mu: Complex64,
}

fn branch_sqrt(z: Complex64, positive: bool, what: &str) -> Result<Complex64> {
    let r = z.sqrt();
    if r.re.abs() <= 1e-12 * r.norm() {
        return Err(Error::numerical(
            "boundary_constants",
            format!("{what}: square root of {z} has no definite real-part sign"),
        ));
    }
    Ok(if (r.re > 0.0) == positive { r } else { -r })
}

/// `λ = 1/√(iα(U(a) - c))` with `Re √ < 0`, and `μ = 1/√(iα(U(b) - c))` with `Re √ > 0`.
pub fn boundary_constants(profile: &ShearProfile, alpha: f64, c: Complex64) -> Result<BoundaryConstants> {
    let (ua, ub) = profile
        .boundary_values()
        .ok_or_else(|| Error::InvalidArgument("boundary constants need a segment profile".into()))?;
    let i_alpha = Complex64::new(0.0, alpha);
    let left = branch_sqrt(i_alpha * (ua - c), false, "left end")?;
    let right = branch_sqrt(i_alpha * (ub - c), true, "right end")?;
    Ok(BoundaryConstants { lambda: left.inv(), mu: right.inv() })
}

#[derive(Clone, Debug, Serialize)]
pub struct FirstOrder {
    /// `ċ(0)` in physical units.
    pub cdot: Complex64,
    pub numerator: Complex64,
    pub denominator: Complex64,
    /// Discrete eigenvalue used to extract the resonant state.
    pub c_discrete: Complex64,
}

fn simple_eigenpair(s: &Spectrum, c1: Complex64, op: &'static str) -> Result<(usize, Complex64)> {
    let (idx, value) = s
        .nearest(c1)
        .ok_or_else(|| Error::numerical(op, "empty spectrum"))?;
    let (count, _) = eigen::cluster(&s.eigenvalues, value, DEFAULT_CLUSTER_RADIUS);
    if count != 1 {
        return Err(Error::numerical(op, format!("resonance near {c1} has multiplicity {count}, expected 1")));
    }
    Ok((idx, value))
}

/// First-order coefficient `ċ(0)` on the segment from the discrete resonant state.
///
/// `ċ(0) = (λ (∂ψ₀(a))² - μ (∂ψ₀(b))²) / ∫ ψ₀ (∂² - α²) ψ₀ / (U - c₁) dz`, evaluated in the
/// canonical variable and rescaled.
pub fn first_order_segment(
    profile: &ShearProfile,
    contour: &DeformedContour,
    alpha: f64,
    c1: Complex64,
    n: usize,
) -> Result<FirstOrder> {
    let disc = SegmentDisc::new(profile, contour, alpha, n)?;
    let s = eigen::eig(&disc.rayleigh_q(), true)?;
    let (idx, c_discrete) = simple_eigenpair(&s, c1, "first_order_segment")?;
    let u = s.eigenvector(idx).expect("vectors requested");
    let psi_int = linalg::matvec(&disc.helmholtz.inverse, &u);
    let zero = Complex64::new(0.0, 0.0);
    let mut psi = vec![zero];
    psi.extend(psi_int);
    psi.push(zero);
    first_order_from_state(&disc, &psi, c1).map(|mut f| {
        f.c_discrete = c_discrete;
        f
    })
}

/// Same formula for a given resonant state sampled at all `N + 1` nodes (zero at both ends).
pub fn first_order_from_state(disc: &SegmentDisc, psi: &[Complex64], c1: Complex64) -> Result<FirstOrder> {
    let n = disc.n();
    if psi.len() != n + 1 {
        return Err(Error::InvalidArgument(format!("state needs {} samples, got {}", n + 1, psi.len())));
    }
    let scale = psi.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::InvalidArgument("resonant state is identically zero".into()));
    }
    let psi: Vec<Complex64> = psi.iter().map(|z| z / scale).collect();
    let dpsi = disc.differentiate(&psi);
    let d2psi = disc.differentiate(&dpsi);
    let a2 = disc.alpha_c * disc.alpha_c;
    let w = clenshaw_curtis_weights(n);
    let (ua, ub) = disc.profile.boundary_values().expect("segment profile");
    let mut denominator = Complex64::new(0.0, 0.0);
    // endpoints contribute nothing since ψ vanishes there
    for j in 1..n {
        let u = disc.profile.eval_canonical(disc.gamma[j], 0);
        let lap = d2psi[j] - psi[j] * a2;
        denominator += psi[j] * lap / (u - c1) * disc.dgamma[j] * w[j];
    }
    let reference = (0..=n)
        .map(|j| (psi[j] * (d2psi[j] - psi[j] * a2)).norm() * w[j])
        .sum::<f64>()
        / (ua - c1).norm().max((ub - c1).norm());
    if denominator.norm() <= DENOMINATOR_MARGIN * reference.max(1.0) {
        return Err(Error::numerical(
            "first_order_segment",
            format!("denominator {denominator} vanishes"),
        ));
    }
    let k = boundary_constants(&disc.profile, disc.alpha_c, c1)?;
    // x_0 = 1 is the right end b, x_N = -1 the left end a
    let numerator = k.lambda * dpsi[n] * dpsi[n] - k.mu * dpsi[0] * dpsi[0];
    let cdot = numerator / denominator / disc.profile.domain.scale().sqrt();
    Ok(FirstOrder { cdot, numerator, denominator, c_discrete: c1 })
}

/// Closed form of `ċ(0)` for `U(x) = cos(ωx)` on `[-1, 1]` at `c₁ = 0`, `α = √(ω² - π²/4)`.
pub fn cos_flow_first_order(omega: f64) -> Result<Complex64> {
    if !(omega > FRAC_PI_2 && omega < PI) {
        return Err(Error::InvalidArgument(format!("omega must lie in (π/2, π), got {omega}")));
    }
    let alpha = (omega * omega - PI * PI / 4.0).sqrt();
    let root = FRAC_PI_2 / omega;
    let integrand = |x: f64| (FRAC_PI_2 * x).cos().powi(2) / (omega * x).cos();
    let pv = principal_value(integrand, -1.0, 1.0, &[-root, root], 64);
    let check = principal_value(integrand, -1.0, 1.0, &[-root, root], 128);
    if (pv - check).abs() > 1e-8 * pv.abs().max(1.0) {
        return Err(Error::numerical(
            "cos_flow_first_order",
            format!("principal value not converged: {pv} vs {check}"),
        ));
    }
    let tail = Complex64::new(0.0, 2.0 * PI / omega) * (PI * PI / (4.0 * omega)).cos().powi(2);
    let prefactor = Complex64::from_polar(PI * PI, FRAC_PI_4) / (2.0 * omega * omega * (alpha * omega.cos().abs()).sqrt());
    Ok(prefactor / (tail + pv))
}

#[derive(Clone, Debug, Serialize)]
pub struct SecondOrder {
    /// `c̃` in physical units.
    pub ctilde: Complex64,
    pub numerator: Complex64,
    pub denominator: Complex64,
    pub c_discrete: Complex64,
}

/// `c̃ = iα⁻¹ ∫ ψ₀/(U - c₁) (∂² - α²)² ψ₀ dz / ∫ U'' (ψ₀/(U - c₁))² dz` on the circle.
pub fn second_order_circle(
    profile: &ShearProfile,
    contour: &DeformedContour,
    alpha: f64,
    c1: Complex64,
    n: usize,
) -> Result<SecondOrder> {
    let disc = CircleDisc::new(profile, contour, alpha, n)?;
    let s = eigen::eig(&disc.q(0.0)?, true)?;
    let (idx, c_discrete) = simple_eigenpair(&s, c1, "second_order_circle")?;
    let u = s.eigenvector(idx).expect("vectors requested");
    let psi_hat = linalg::matvec(&disc.lap_inv, &u);
    let mut out = second_order_from_state(&disc, &psi_hat, c1)?;
    out.c_discrete = c_discrete;
    Ok(out)
}

/// Same ratio for a state given by its Fourier coefficients.
pub fn second_order_from_state(disc: &CircleDisc, psi_hat: &[Complex64], c1: Complex64) -> Result<SecondOrder> {
    let psi = disc.grid.to_samples(psi_hat);
    let bilap = disc.grid.to_samples(&linalg::matvec(&disc.lap, &linalg::matvec(&disc.lap, psi_hat)));
    let h = 2.0 * PI / disc.n() as f64;
    let mut numerator = Complex64::new(0.0, 0.0);
    let mut denominator = Complex64::new(0.0, 0.0);
    let mut reference = 0.0;
    for j in 0..disc.n() {
        let q = psi[j] / (disc.u[j] - c1);
        numerator += q * bilap[j] * disc.dgamma[j] * h;
        let d = disc.u2[j] * q * q * disc.dgamma[j] * h;
        reference += d.norm();
        denominator += d;
    }
    numerator *= Complex64::new(0.0, 1.0 / disc.alpha_c);
    if denominator.norm() <= DENOMINATOR_MARGIN * reference {
        return Err(Error::numerical(
            "second_order_circle",
            format!("denominator {denominator} vanishes"),
        ));
    }
    let ctilde = numerator / denominator / disc.profile.domain.scale();
    Ok(SecondOrder { ctilde, numerator, denominator, c_discrete: c1 })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Eigenvalue nearest to the previous branch point.
    #[default]
    Nearest,
    /// Eigenvector with the largest overlap with the previous one.
    Overlap,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrackedBranch {
    pub epsilon: Vec<f64>,
    pub c: Vec<Complex64>,
    /// `|c_k - c_{k-1}|` for each accepted step (the anchor carries the distance to the discrete spectrum).
    pub match_dist: Vec<f64>,
    pub alpha: f64,
    pub tau: f64,
    pub n: usize,
    pub profile: String,
    pub bisections: usize,
}

/// `{0} ∪ {ε_max 2^{-j} : j = 0..levels}` in ascending order.
pub fn default_epsilon_grid(eps_max: f64, levels: usize) -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend((0..levels).rev().map(|j| eps_max * 0.5f64.powi(j as i32)));
    g
}

/// Smallest `ε` whose wall boundary layers are resolved by `N + 1` Chebyshev points.
///
/// The layers have width `ε/√(α|U(end) - c₁|)` in the canonical variable and the
/// node spacing next to the walls is about `π²/(2N²)`.
pub fn resolution_floor(profile: &ShearProfile, alpha: f64, c1: Complex64, n: usize) -> f64 {
    let Some((ua, ub)) = profile.boundary_values() else {
        return 0.0;
    };
    let h = profile.domain.scale();
    let gap = (ua - c1).norm().min((ub - c1).norm());
    let canonical = 0.75 * (alpha * h * gap).sqrt() * PI * PI / (n * n) as f64;
    canonical * h.sqrt()
}

/// Geometric grid as in [`default_epsilon_grid`], without positive values below the resolution floor.
pub fn resolved_epsilon_grid(
    profile: &ShearProfile,
    alpha: f64,
    c1: Complex64,
    n: usize,
    eps_max: f64,
    levels: usize,
) -> Vec<f64> {
    let floor = resolution_floor(profile, alpha, c1, n);
    default_epsilon_grid(eps_max, levels).into_iter().filter(|&e| e == 0.0 || e >= floor).collect()
}

enum Disc {
    Segment(SegmentDisc),
    Circle(CircleDisc),
}

impl Disc {
    fn spectrum(&self, epsilon: f64, vectors: bool) -> Result<Spectrum> {
        match self {
            Disc::Segment(d) => {
                let p = d.pencil(epsilon)?;
                eigen::eig_pencil(&p.a, &p.b, vectors)
            }
            Disc::Circle(d) => eigen::eig(&d.q(epsilon)?, vectors),
        }
    }
}

fn overlap(a: &[Complex64], b: &[Complex64]) -> f64 {
    let dot: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    dot.norm() / (linalg::vec_norm(a) * linalg::vec_norm(b)).max(f64::MIN_POSITIVE)
}

/// Continues the resonance `c1` through the viscous spectra on `eps_grid` (ascending, starting at 0).
pub fn track_branch(
    profile: &ShearProfile,
    contour: &DeformedContour,
    alpha: f64,
    c1: Complex64,
    eps_grid: &[f64],
    n: usize,
    mode: MatchMode,
) -> Result<TrackedBranch> {
    if eps_grid.first() != Some(&0.0) {
        return Err(Error::InvalidArgument("epsilon grid must start at 0".into()));
    }
    if eps_grid.windows(2).any(|w| !(w[1] > w[0])) || eps_grid.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidArgument("epsilon grid must be strictly ascending and finite".into()));
    }
    let disc = if profile.domain.is_circle() {
        Disc::Circle(CircleDisc::new(profile, contour, alpha, n)?)
    } else {
        Disc::Segment(SegmentDisc::new(profile, contour, alpha, n)?)
    };
    let vectors = mode == MatchMode::Overlap;
    let s0 = disc.spectrum(0.0, vectors)?;
    let (i0, z0) = s0.nearest(c1).ok_or_else(|| Error::numerical("track_branch", "empty spectrum"))?;
    let mut prev_vec = s0.eigenvector(i0);

    let mut branch = TrackedBranch {
        epsilon: vec![0.0],
        c: vec![c1],
        match_dist: vec![(z0 - c1).norm()],
        alpha,
        tau: contour.tau,
        n,
        profile: profile.id(),
        bisections: 0,
    };
    let mut prev_rate: Option<f64> = None;
    for &target in &eps_grid[1..] {
        let mut attempts = 0;
        while *branch.epsilon.last().unwrap() < target {
            let eps_prev = *branch.epsilon.last().unwrap();
            let c_prev = *branch.c.last().unwrap();
            let step = if attempts == 0 { target - eps_prev } else { (target - eps_prev) * 0.5f64.powi(attempts as i32) };
            let eps = if attempts == 0 { target } else { eps_prev + step };
            let s = disc.spectrum(eps, vectors)?;
            let (idx, c_new) = match (&prev_vec, mode) {
                (Some(pv), MatchMode::Overlap) => {
                    let v = s.eigenvectors.as_ref().expect("vectors requested");
                    (0..s.len())
                        .map(|j| (j, overlap(pv, &linalg::column(v, j))))
                        .max_by(|a, b| a.1.total_cmp(&b.1))
                        .map(|(j, _)| (j, s.eigenvalues[j]))
                        .ok_or_else(|| Error::numerical("track_branch", "empty spectrum"))?
                }
                _ => s.nearest(c_prev).ok_or_else(|| Error::numerical("track_branch", "empty spectrum"))?,
            };
            let jump = (c_new - c_prev).norm();
            let rate = jump / (eps - eps_prev);
            let collision = matches!(prev_rate, Some(r) if rate > JUMP_FACTOR * r && jump > 1e-8);
            if collision {
                attempts += 1;
                branch.bisections += 1;
                if attempts > MAX_BISECTIONS {
                    return Err(Error::numerical(
                        "track_branch",
                        format!("branch collision near epsilon = {eps_prev} unresolved after {MAX_BISECTIONS} bisections"),
                    ));
                }
                continue;
            }
            branch.epsilon.push(eps);
            branch.c.push(c_new);
            branch.match_dist.push(jump);
            prev_rate = Some(rate);
            if vectors {
                prev_vec = s.eigenvector(idx);
            }
            attempts = 0;
        }
    }
    Ok(branch)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    All,
    Even,
}

#[derive(Clone, Debug, Serialize)]
pub struct TaylorFit {
    /// `coefficients[k]` multiplies `ε^k`; entry 0 is the anchor `c(0)`.
    pub coefficients: Vec<Complex64>,
    pub residual: f64,
    /// Condition number of the rescaled least-squares matrix.
    pub condition: f64,
}

impl TaylorFit {
    pub fn coefficient(&self, power: usize) -> Complex64 {
        self.coefficients.get(power).copied().unwrap_or_default()
    }
}

/// Least-squares polynomial in `ε` (or in `ε²`) through the branch, anchored at `c(0)`.
pub fn fit_taylor(branch: &TrackedBranch, degree: usize, parity: Parity) -> Result<TaylorFit> {
    if degree == 0 {
        return Err(Error::InvalidArgument("fit degree must be >= 1".into()));
    }
    let m = branch.epsilon.len();
    if m < degree + 2 {
        return Err(Error::InvalidArgument(format!(
            "a degree-{degree} fit needs at least {} branch points, got {m}",
            degree + 2
        )));
    }
    if branch.epsilon[0] != 0.0 {
        return Err(Error::InvalidArgument("branch must start at epsilon = 0".into()));
    }
    let eps_max = branch.epsilon.iter().cloned().fold(0.0, f64::max);
    let powers: Vec<usize> = match parity {
        Parity::All => (1..=degree).collect(),
        Parity::Even => (1..=degree).map(|k| 2 * k).collect(),
    };
    let c0 = branch.c[0];
    let t: Vec<f64> = branch.epsilon[1..].iter().map(|e| e / eps_max).collect();
    let rows = t.len();
    let v = Mat::from_fn(rows, powers.len(), |i, k| t[i].powi(powers[k] as i32));
    let sv = v.singular_values().map_err(|_| Error::numerical("fit_taylor", "SVD failed"))?;
    let condition = sv.first().copied().unwrap_or(0.0) / sv.last().copied().unwrap_or(0.0);
    if !condition.is_finite() || condition > 1e12 {
        return Err(Error::numerical("fit_taylor", format!("Vandermonde matrix is ill-conditioned ({condition:e})")));
    }
    let vc = linalg::real_to_complex(v.as_ref());
    let rhs = Mat::from_fn(rows, 1, |i, _| branch.c[i + 1] - c0);
    let sol = vc.qr().solve_lstsq(&rhs);
    let mut coefficients = vec![Complex64::new(0.0, 0.0); powers.last().unwrap() + 1];
    coefficients[0] = c0;
    for (k, &p) in powers.iter().enumerate() {
        coefficients[p] = sol[(k, 0)] / eps_max.powi(p as i32);
    }
    let residual = (0..rows)
        .map(|i| {
            let e = branch.epsilon[i + 1];
            let fit: Complex64 = coefficients.iter().enumerate().map(|(p, a)| a * e.powi(p as i32)).sum();
            (fit - branch.c[i + 1]).norm()
        })
        .fold(0.0, f64::max);
    Ok(TaylorFit { coefficients, residual, condition })
}
