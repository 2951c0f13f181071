//! Resonances of the Rayleigh operator: eigenvalues of the deformed `Q` away
//! from the ellipticity curve, confirmed on a segment by the boundary Wronskian.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::circle::CircleDisc;
use crate::contour::DeformedContour;
use crate::eigen::{self, Spectrum};
use crate::error::{Error, Result};
use crate::linalg;
use crate::ode::{self, OdeOptions};
use crate::profile::ShearProfile;
use crate::segment::{self, SegmentDisc};

pub const DEFAULT_BAND: f64 = 0.02;
pub const DEFAULT_CLUSTER_RADIUS: f64 = 1e-4;
/// Minimal distance between `c` and `U(γ(x))` accepted by the shooting route.
pub const WRONSKIAN_MARGIN: f64 = 1e-8;
pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 50;
pub const WINDING_MIN_NODES: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Window {
    Rect { re_min: f64, re_max: f64, im_min: f64, im_max: f64 },
    Disk { re: f64, im: f64, radius: f64 },
}

impl Window {
    pub fn rect(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Window::Rect { re_min, re_max, im_min, im_max }
    }

    pub fn disk(center: Complex64, radius: f64) -> Self {
        Window::Disk { re: center.re, im: center.im, radius }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        match *self {
            Window::Rect { re_min, re_max, im_min, im_max } => {
                z.re >= re_min && z.re <= re_max && z.im >= im_min && z.im <= im_max
            }
            Window::Disk { re, im, radius } => (z - Complex64::new(re, im)).norm() <= radius,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResonanceRecord {
    /// Best estimate: the Newton-refined root when the shooting route confirmed a simple resonance.
    pub c: Complex64,
    /// Cluster mean of the discrete eigenvalues.
    pub eigen_c: Complex64,
    pub multiplicity: usize,
    pub eigen_route: bool,
    pub wronskian_route: bool,
    pub eigen_residual: f64,
    /// `|W(c)|` at the reported `c`, when the shooting route could be evaluated.
    pub wronskian_abs: Option<f64>,
    pub winding: Option<i64>,
    pub dist_to_curve: f64,
    /// Stream function of one eigenvector at the discretization nodes along the contour.
    #[serde(skip)]
    pub state: Option<Vec<Complex64>>,
}

/// Distance from `z` to the polyline through `points` (closed when `closed` is set).
pub fn distance_to_polyline(z: Complex64, points: &[Complex64], closed: bool) -> f64 {
    let seg = |p: Complex64, q: Complex64| {
        let d = q - p;
        let len2 = d.norm_sqr();
        if len2 == 0.0 {
            return (z - p).norm();
        }
        let t = (((z - p) * d.conj()).re / len2).clamp(0.0, 1.0);
        (z - (p + d * t)).norm()
    };
    let mut best = match points.first() {
        Some(&p) => (z - p).norm(),
        None => return f64::INFINITY,
    };
    for w in points.windows(2) {
        best = best.min(seg(w[0], w[1]));
    }
    if closed && points.len() > 2 {
        best = best.min(seg(points[points.len() - 1], points[0]));
    }
    best
}

fn check_segment(profile: &ShearProfile, contour: &DeformedContour) -> Result<()> {
    if profile.domain.is_circle() || contour.domain().is_circle() {
        return Err(Error::InvalidArgument(
            "the boundary Wronskian is only defined on a segment".into(),
        ));
    }
    if profile.domain != contour.domain() {
        return Err(Error::InvalidArgument("profile and contour live on different domains".into()));
    }
    Ok(())
}

/// Minimal `|U(γ(x)) - c|` over a fine parameter grid.
pub fn ellipticity_margin(profile: &ShearProfile, contour: &DeformedContour, c: Complex64) -> f64 {
    segment::ellipticity_samples(profile, contour, 4097)
        .iter()
        .map(|u| (u - c).norm())
        .fold(f64::INFINITY, f64::min)
}

/// `W(c) = ψ(b)` for Rayleigh's equation shot from `ψ(a) = 0`, `ψ'(a) = 1` along the contour.
pub fn wronskian(profile: &ShearProfile, contour: &DeformedContour, alpha: f64, c: Complex64) -> Result<Complex64> {
    check_segment(profile, contour)?;
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be > 0, got {alpha}")));
    }
    let margin = ellipticity_margin(profile, contour, c);
    if !(margin > WRONSKIAN_MARGIN) {
        return Err(Error::numerical(
            "wronskian",
            format!("c = {c} is within {margin:e} of the curve U(γ(x))"),
        ));
    }
    let h = profile.domain.scale();
    let a2 = (alpha * h).powi(2);
    // state (ψ, dψ/dz) in the canonical variable; dψ/dz = h at the start gives the physical normalization
    let rhs = |x: f64, y: &[Complex64; 2]| {
        let z = contour.gamma(x);
        let dg = contour.dgamma(x);
        let u = profile.eval_canonical(z, 0);
        let u2 = profile.eval_canonical(z, 2);
        [dg * y[1], dg * (a2 + u2 / (u - c)) * y[0]]
    };
    let (y, _) = ode::integrate(
        rhs,
        -1.0,
        1.0,
        [Complex64::new(0.0, 0.0), Complex64::new(h, 0.0)],
        OdeOptions::default(),
    )?;
    Ok(y[0])
}

#[derive(Clone, Copy, Debug)]
pub struct Refined {
    pub c: Complex64,
    pub w_abs: f64,
    pub iterations: usize,
}

/// Newton iteration on `W` with a central-difference derivative.
pub fn refine_resonance(
    profile: &ShearProfile,
    contour: &DeformedContour,
    alpha: f64,
    c_init: Complex64,
) -> Result<Refined> {
    let w = |c: Complex64| wronskian(profile, contour, alpha, c);
    let mut c = c_init;
    let mut wc = w(c)?;
    for it in 0..NEWTON_MAX_ITER {
        if wc.norm() < NEWTON_TOL {
            return Ok(Refined { c, w_abs: wc.norm(), iterations: it });
        }
        let step = 1e-5 * c.norm().max(0.1);
        let dw = (w(c + step)? - w(c - step)?) / (2.0 * step);
        if !(dw.norm() > 1e-12 * wc.norm().max(1e-300)) || dw.norm() < 1e-14 {
            return Err(Error::numerical(
                "refine_resonance",
                format!("derivative of W vanishes near c = {c} (|W'| = {:e}); use winding multiplicity", dw.norm()),
            ));
        }
        let delta = wc / dw;
        c -= delta;
        wc = w(c)?;
        if delta.norm() < 1e-13 * c.norm().max(1.0) {
            return Ok(Refined { c, w_abs: wc.norm(), iterations: it + 1 });
        }
    }
    Err(Error::numerical(
        "refine_resonance",
        format!("no convergence in {NEWTON_MAX_ITER} iterations from {c_init} (last |W| = {:e})", wc.norm()),
    ))
}

/// Winding number of `W` around `|c - center| = radius`, i.e. the enclosed multiplicity.
pub fn multiplicity_winding(
    profile: &ShearProfile,
    contour: &DeformedContour,
    alpha: f64,
    center: Complex64,
    radius: f64,
) -> Result<i64> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be > 0, got {radius}")));
    }
    let mut nodes = WINDING_MIN_NODES;
    loop {
        let values = (0..nodes)
            .into_par_iter()
            .map(|j| {
                let theta = 2.0 * std::f64::consts::PI * j as f64 / nodes as f64;
                wronskian(profile, contour, alpha, center + Complex64::from_polar(radius, theta))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(v) = values.iter().find(|v| v.norm() < NEWTON_TOL) {
            return Err(Error::numerical(
                "multiplicity_winding",
                format!("W nearly vanishes on the circle (|W| = {:e})", v.norm()),
            ));
        }
        let mut total = 0.0;
        let mut max_jump: f64 = 0.0;
        for j in 0..nodes {
            let d = (values[(j + 1) % nodes] / values[j]).arg();
            max_jump = max_jump.max(d.abs());
            total += d;
        }
        if max_jump <= std::f64::consts::FRAC_PI_2 {
            return Ok((total / (2.0 * std::f64::consts::PI)).round() as i64);
        }
        if nodes >= 16 * WINDING_MIN_NODES {
            return Err(Error::numerical(
                "multiplicity_winding",
                format!("phase jump of {max_jump:.3} rad persists with {nodes} nodes"),
            ));
        }
        nodes *= 2;
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ResonanceOptions {
    pub band: f64,
    pub cluster_radius: f64,
    /// Confirm segment resonances by Newton refinement and winding numbers; clusters with winding 0 are dropped.
    pub shooting: bool,
    pub keep_states: bool,
}

impl Default for ResonanceOptions {
    fn default() -> Self {
        ResonanceOptions { band: DEFAULT_BAND, cluster_radius: DEFAULT_CLUSTER_RADIUS, shooting: true, keep_states: false }
    }
}

/// Spectrum of the deformed Rayleigh operator with stream functions at the nodes.
pub struct RayleighSpectrum {
    pub spectrum: Spectrum,
    pub states: Vec<Vec<Complex64>>,
    pub curve: Vec<Complex64>,
    pub closed: bool,
}

pub fn rayleigh_spectrum(
    profile: &ShearProfile,
    contour: &DeformedContour,
    alpha: f64,
    n: usize,
) -> Result<RayleighSpectrum> {
    let closed = profile.domain.is_circle();
    let curve = segment::ellipticity_samples(profile, contour, 2049);
    let (spectrum, states) = if closed {
        let disc = CircleDisc::new(profile, contour, alpha, n)?;
        let s = eigen::eig(&disc.q(0.0)?, true)?;
        let v = s.eigenvectors.as_ref().expect("vectors requested");
        let states = (0..s.len()).map(|j| disc.stream_function(&linalg::column(v, j))).collect();
        (s, states)
    } else {
        let disc = SegmentDisc::new(profile, contour, alpha, n)?;
        let s = eigen::eig(&disc.rayleigh_q(), true)?;
        let v = s.eigenvectors.as_ref().expect("vectors requested");
        let zero = Complex64::new(0.0, 0.0);
        let states = (0..s.len())
            .map(|j| {
                let psi = linalg::matvec(&disc.helmholtz.inverse, &linalg::column(v, j));
                let mut full = Vec::with_capacity(n + 1);
                full.push(zero);
                full.extend(psi);
                full.push(zero);
                full
            })
            .collect();
        (s, states)
    };
    Ok(RayleighSpectrum { spectrum, states, curve, closed })
}

/// Resonances inside `window`, filtered away from the curve `{U(γ(x))}` and clustered.
pub fn resonances_in_window(
    profile: &ShearProfile,
    contour: &DeformedContour,
    alpha: f64,
    n: usize,
    window: Window,
    opts: ResonanceOptions,
) -> Result<Vec<ResonanceRecord>> {
    if !(opts.band > 0.0) {
        return Err(Error::InvalidArgument(format!("band must be > 0, got {}", opts.band)));
    }
    let rs = rayleigh_spectrum(profile, contour, alpha, n)?;
    let evs = &rs.spectrum.eigenvalues;
    let mut candidates: Vec<usize> = (0..evs.len())
        .filter(|&i| window.contains(evs[i]) && distance_to_polyline(evs[i], &rs.curve, rs.closed) > opts.band)
        .collect();
    candidates.sort_by(|&i, &j| evs[i].re.total_cmp(&evs[j].re).then(evs[i].im.total_cmp(&evs[j].im)));

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut used = vec![false; candidates.len()];
    for a in 0..candidates.len() {
        if used[a] {
            continue;
        }
        let mut group = vec![candidates[a]];
        used[a] = true;
        for b in a + 1..candidates.len() {
            if !used[b] && (evs[candidates[b]] - evs[candidates[a]]).norm() <= opts.cluster_radius {
                used[b] = true;
                group.push(candidates[b]);
            }
        }
        groups.push(group);
    }

    let shooting = opts.shooting && !rs.closed;
    let mut records: Vec<ResonanceRecord> = groups
        .par_iter()
        .map(|group| {
            let m = group.len();
            let mean = group.iter().map(|&i| evs[i]).sum::<Complex64>() / m as f64;
            let dist = distance_to_polyline(mean, &rs.curve, rs.closed);
            let residual = group.iter().map(|&i| rs.spectrum.residuals[i]).fold(0.0, f64::max);
            let mut record = ResonanceRecord {
                c: mean,
                eigen_c: mean,
                multiplicity: m,
                eigen_route: true,
                wronskian_route: false,
                eigen_residual: residual,
                wronskian_abs: None,
                winding: None,
                dist_to_curve: dist,
                state: opts.keep_states.then(|| normalize_state(&rs.states[group[0]])),
            };
            if shooting {
                let radius = (0.5 * dist).min(0.05).max(10.0 * opts.cluster_radius);
                record.winding = multiplicity_winding(profile, contour, alpha, mean, radius).ok();
                if m == 1 {
                    if let Ok(r) = refine_resonance(profile, contour, alpha, mean) {
                        if (r.c - mean).norm() < radius && record.winding == Some(1) {
                            record.c = r.c;
                            record.wronskian_abs = Some(r.w_abs);
                            record.wronskian_route = true;
                        }
                    }
                } else if record.winding == Some(m as i64) {
                    record.wronskian_abs = wronskian(profile, contour, alpha, mean).ok().map(|w| w.norm());
                    record.wronskian_route = true;
                }
            }
            record
        })
        .collect();
    // clusters around which W does not wind are discretization artifacts
    records.retain(|r| r.winding != Some(0));
    records.sort_by(|a, b| a.c.im.abs().total_cmp(&b.c.im.abs()).then(a.c.re.total_cmp(&b.c.re)));
    Ok(records)
}

fn normalize_state(v: &[Complex64]) -> Vec<Complex64> {
    let pivot = v.iter().cloned().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or_default();
    if pivot.norm() == 0.0 {
        return v.to_vec();
    }
    v.iter().map(|z| z / pivot).collect()
}
