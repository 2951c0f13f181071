//! Complex deformations `γ_τ(s) = s + iτ m₀(s)` of the canonical segment or circle.
//!
//! Escape functions are written in the canonical variable. On a segment they
//! must vanish at `s = ±1` so the endpoints stay fixed; on a circle they must be
//! `2π`-periodic. Whether a deformation actually makes the Rayleigh operator
//! elliptic near a real value `c₀` is certified a posteriori by
//! [`validate_contour`] on finite sampling grids.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{Domain, ShearProfile};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum EscapeFamily {
    /// `m₀(s) = 0`.
    Zero,
    /// `m₀(s) = sin(ω s + φ)`, times `cos(π s / 2)` when `window` is set.
    Trig { omega: f64, phase: f64, window: bool },
    /// `m₀(s) = (2θ s + θ - 1) cos(π s / 2)`.
    CouettePoiseuille { theta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeFunction {
    pub family: EscapeFamily,
    /// Overall multiplier applied to the family expression.
    pub scale: f64,
    pub domain: Domain,
}

impl EscapeFunction {
    pub fn new(family: EscapeFamily, scale: f64, domain: Domain) -> Result<Self> {
        if !scale.is_finite() {
            return Err(Error::Escape(format!("scale must be finite, got {scale}")));
        }
        let escape = EscapeFunction { family, scale, domain };
        match (family, domain) {
            (EscapeFamily::Trig { omega, phase, .. }, _) if !(omega.is_finite() && phase.is_finite()) => {
                return Err(Error::Escape("trig escape needs finite omega and phase".into()));
            }
            (EscapeFamily::CouettePoiseuille { theta }, _) if !theta.is_finite() => {
                return Err(Error::Escape("couette_poiseuille escape needs finite theta".into()));
            }
            (_, Domain::Segment { .. }) => {
                for s in [-1.0, 1.0] {
                    let v = escape.m0(s);
                    if v.abs() > 1e-12 {
                        return Err(Error::Escape(format!(
                            "escape function must vanish at the endpoints, m0({s}) = {v:e}"
                        )));
                    }
                }
            }
            (EscapeFamily::Zero, Domain::Circle { .. }) => {}
            (EscapeFamily::Trig { omega, window, .. }, Domain::Circle { .. }) => {
                if window || (omega - omega.round()).abs() > 1e-12 {
                    return Err(Error::Escape(
                        "circle escape functions need an integer frequency and no window".into(),
                    ));
                }
            }
            (EscapeFamily::CouettePoiseuille { .. }, Domain::Circle { .. }) => {
                return Err(Error::Escape("couette_poiseuille escape is not periodic".into()));
            }
        }
        Ok(escape)
    }

    /// `sin(ω s) cos(π s / 2)`, the deformation used for `cos(ω x)` flows.
    pub fn windowed_sine(omega: f64) -> Self {
        EscapeFunction {
            family: EscapeFamily::Trig { omega, phase: 0.0, window: true },
            scale: 1.0,
            domain: Domain::unit_segment(),
        }
    }

    pub fn m0(&self, s: f64) -> f64 {
        let v = match self.family {
            EscapeFamily::Zero => 0.0,
            EscapeFamily::Trig { omega, phase, window } => {
                let base = (omega * s + phase).sin();
                if window {
                    base * (FRAC_PI_2 * s).cos()
                } else {
                    base
                }
            }
            EscapeFamily::CouettePoiseuille { theta } => {
                (2.0 * theta * s + theta - 1.0) * (FRAC_PI_2 * s).cos()
            }
        };
        self.scale * v
    }

    pub fn dm0(&self, s: f64) -> f64 {
        let v = match self.family {
            EscapeFamily::Zero => 0.0,
            EscapeFamily::Trig { omega, phase, window } => {
                let arg = omega * s + phase;
                if window {
                    omega * arg.cos() * (FRAC_PI_2 * s).cos()
                        - FRAC_PI_2 * arg.sin() * (FRAC_PI_2 * s).sin()
                } else {
                    omega * arg.cos()
                }
            }
            EscapeFamily::CouettePoiseuille { theta } => {
                2.0 * theta * (FRAC_PI_2 * s).cos()
                    - (2.0 * theta * s + theta - 1.0) * FRAC_PI_2 * (FRAC_PI_2 * s).sin()
            }
        };
        self.scale * v
    }

    pub fn id(&self) -> String {
        let base = match self.family {
            EscapeFamily::Zero => "zero".to_string(),
            EscapeFamily::Trig { omega, phase, window } => {
                format!("trig(omega={omega},phase={phase},window={window})")
            }
            EscapeFamily::CouettePoiseuille { theta } => format!("couette_poiseuille(theta={theta})"),
        };
        if self.scale == 1.0 {
            base
        } else {
            format!("{}*{base}", self.scale)
        }
    }
}

/// Builds an escape function from a family name and named parameters.
pub fn make_escape(family: &str, params: &BTreeMap<String, f64>, domain: Domain) -> Result<EscapeFunction> {
    let get = |name: &str| {
        params
            .get(name)
            .copied()
            .ok_or_else(|| Error::Escape(format!("{family} escape needs parameter `{name}`")))
    };
    let allowed: &[&str] = match family {
        "zero" => &["scale"],
        "trig" => &["omega", "phase", "window", "scale"],
        "couette_poiseuille" => &["theta", "scale"],
        other => return Err(Error::Escape(format!("unknown escape family `{other}`"))),
    };
    if let Some(extra) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::Escape(format!("{family} escape has no parameter `{extra}`")));
    }
    let parsed = match family {
        "zero" => EscapeFamily::Zero,
        "trig" => EscapeFamily::Trig {
            omega: get("omega")?,
            phase: params.get("phase").copied().unwrap_or(0.0),
            window: params.get("window").copied().unwrap_or(0.0) != 0.0,
        },
        _ => EscapeFamily::CouettePoiseuille { theta: get("theta")? },
    };
    EscapeFunction::new(parsed, params.get("scale").copied().unwrap_or(1.0), domain)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeformedContour {
    pub escape: EscapeFunction,
    pub tau: f64,
}

impl DeformedContour {
    pub fn new(escape: EscapeFunction, tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::Escape(format!("tau must be finite and >= 0, got {tau}")));
        }
        Ok(DeformedContour { escape, tau })
    }

    pub fn undeformed(domain: Domain) -> Self {
        DeformedContour {
            escape: EscapeFunction { family: EscapeFamily::Zero, scale: 1.0, domain },
            tau: 0.0,
        }
    }

    pub fn domain(&self) -> Domain {
        self.escape.domain
    }

    pub fn gamma(&self, s: f64) -> Complex64 {
        Complex64::new(s, self.tau * self.escape.m0(s))
    }

    pub fn dgamma(&self, s: f64) -> Complex64 {
        Complex64::new(1.0, self.tau * self.escape.dm0(s))
    }

    /// `γ_τ(s)` for `order == 0`, `γ_τ'(s)` otherwise.
    pub fn map(&self, s: f64, order: u8) -> Complex64 {
        if order == 0 {
            self.gamma(s)
        } else {
            self.dgamma(s)
        }
    }

    /// Uniform samples of the canonical parameter; segment grids include both endpoints.
    pub fn sample_grid(&self, n: usize) -> Vec<f64> {
        match self.domain() {
            Domain::Segment { .. } => (0..n)
                .map(|j| -1.0 + 2.0 * j as f64 / (n - 1) as f64)
                .collect(),
            Domain::Circle { .. } => (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect(),
        }
    }

    pub fn id(&self) -> String {
        format!("{}@tau={}", self.escape.id(), self.tau)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    /// `|arg γ'| < π/4`.
    C1Slope,
    /// `m₀ U' ≤ 0`, strict at the real roots of `U - c₀`.
    C2Sign,
    /// `U(γ) - c` bounded away from zero for `c` near `c₀`.
    C3Ellipticity,
    /// `Im U(s + i t m(s)) ≤ tol` along the homotopy.
    C4ImaginaryPart,
}

impl Condition {
    pub fn label(&self) -> &'static str {
        match self {
            Condition::C1Slope => "C1",
            Condition::C2Sign => "C2",
            Condition::C3Ellipticity => "C3",
            Condition::C4ImaginaryPart => "C4",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: Condition,
    /// Canonical grid point where the condition is worst.
    pub x: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub failures: Vec<Violation>,
    /// `max |τ m₀'|`; C1 needs it below 1.
    pub max_slope: f64,
    /// Distance from the sampled ellipticity curve to `[c₀-δ, c₀+δ]`.
    pub ellipticity_margin: f64,
    /// Sampling resolution the margin must exceed.
    pub ellipticity_resolution: f64,
    pub max_imag: f64,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "ok={} max_slope={:.3e} ellipticity_margin={:.3e} (resolution {:.3e}) max_imag={:.3e}",
            self.ok, self.max_slope, self.ellipticity_margin, self.ellipticity_resolution, self.max_imag
        )?;
        for v in &self.failures {
            writeln!(f, "  {} violated at x={:.6} (value {:.6e})", v.condition.label(), v.x, v.value)?;
        }
        Ok(())
    }
}

impl ValidationReport {
    pub fn failed(&self, condition: Condition) -> bool {
        self.failures.iter().any(|v| v.condition == condition)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationGrid {
    pub nx: usize,
    pub nt: usize,
}

impl Default for ValidationGrid {
    fn default() -> Self {
        ValidationGrid { nx: 512, nt: 5 }
    }
}

/// Checks the escape-function conditions for the pair `(profile, contour)` near `c0`.
pub fn validate_contour(
    profile: &ShearProfile,
    contour: &DeformedContour,
    c0: f64,
    delta: f64,
    grid: ValidationGrid,
) -> Result<ValidationReport> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("delta must be > 0, got {delta}")));
    }
    if grid.nx < 64 || grid.nt < 2 {
        return Err(Error::InvalidArgument(format!(
            "validation grid too coarse: nx={} nt={}",
            grid.nx, grid.nt
        )));
    }
    if profile.domain.is_circle() != contour.domain().is_circle() {
        return Err(Error::InvalidArgument("profile and contour domains differ".into()));
    }
    if let Some((ua, ub)) = profile.boundary_values() {
        if (c0 - ua).abs() <= 1e-10 || (c0 - ub).abs() <= 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "c0 = {c0} is a boundary value of U (U(a) = {ua}, U(b) = {ub})"
            )));
        }
    }

    let xs = contour.sample_grid(grid.nx);
    let tau = contour.tau;
    let escape = &contour.escape;
    let mut failures = Vec::new();
    let real = |s: f64| Complex64::new(s, 0.0);

    // C1
    let (slope_x, max_slope) = worst(&xs, |s| (tau * escape.dm0(s)).abs());
    if !(max_slope.atan() < FRAC_PI_4) {
        failures.push(Violation { condition: Condition::C1Slope, x: slope_x, value: max_slope.atan() });
    }

    // C2: sign everywhere, then strictness at the real roots of U - c0.
    let sign = |s: f64| escape.m0(s) * profile.eval_canonical(real(s), 1).re;
    let (sign_x, sign_max) = worst(&xs, sign);
    if sign_max > 1e-12 {
        failures.push(Violation { condition: Condition::C2Sign, x: sign_x, value: sign_max });
    }
    let shifted = |s: f64| profile.eval_canonical(real(s), 0).re - c0;
    for root in real_roots(&xs, shifted, !contour.domain().is_circle()) {
        let v = sign(root);
        if !(v < -1e-12) {
            failures.push(Violation { condition: Condition::C2Sign, x: root, value: v });
        }
    }

    // C3: distance from the sampled curve to the real interval [c0-δ, c0+δ].
    let distance = |w: Complex64| {
        let dx = if w.re < c0 - delta {
            c0 - delta - w.re
        } else if w.re > c0 + delta {
            w.re - c0 - delta
        } else {
            0.0
        };
        dx.hypot(w.im)
    };
    let mut margin = f64::INFINITY;
    let mut margin_x = xs[0];
    let mut lipschitz: f64 = 0.0;
    for &s in &xs {
        let z = contour.gamma(s);
        let d = distance(profile.eval_canonical(z, 0));
        if d < margin {
            margin = d;
            margin_x = s;
        }
        lipschitz = lipschitz.max((profile.eval_canonical(z, 1) * contour.dgamma(s)).norm());
    }
    let spacing = xs[1] - xs[0];
    let resolution = 0.525 * lipschitz * spacing;
    if !(margin > resolution) {
        failures.push(Violation { condition: Condition::C3Ellipticity, x: margin_x, value: margin });
    }

    // C4
    let tol = 1e-10 * (1.0 + tau);
    let mut max_imag = f64::NEG_INFINITY;
    let mut imag_x = xs[0];
    for j in 0..grid.nt {
        let t = j as f64 / (grid.nt - 1) as f64;
        for &s in &xs {
            let z = Complex64::new(s, t * tau * escape.m0(s));
            let im = profile.eval_canonical(z, 0).im;
            if im > max_imag {
                max_imag = im;
                imag_x = s;
            }
        }
    }
    if max_imag > tol {
        failures.push(Violation { condition: Condition::C4ImaginaryPart, x: imag_x, value: max_imag });
    }

    failures.sort_by(|a, b| a.condition.cmp(&b.condition));
    Ok(ValidationReport {
        ok: failures.is_empty(),
        failures,
        max_slope,
        ellipticity_margin: margin,
        ellipticity_resolution: resolution,
        max_imag,
    })
}

fn worst(xs: &[f64], f: impl Fn(f64) -> f64) -> (f64, f64) {
    xs.iter()
        .map(|&s| (s, f(s)))
        .fold((xs[0], f64::NEG_INFINITY), |acc, p| if p.1 > acc.1 { p } else { acc })
}

/// Roots of a real function in the open domain, bracketed on the grid and
/// refined by bisection.
fn real_roots(xs: &[f64], f: impl Fn(f64) -> f64, open: bool) -> Vec<f64> {
    let mut roots = Vec::new();
    let n = xs.len();
    // On a circle the last sample wraps around to the first.
    let pairs = if open { n - 1 } else { n };
    for i in 0..pairs {
        let lo = xs[i];
        let hi = if i + 1 < n { xs[i + 1] } else { xs[0] + 2.0 * PI };
        let (flo, fhi) = (f(lo), f(hi));
        if flo == 0.0 {
            if !(open && i == 0) {
                roots.push(lo);
            }
            continue;
        }
        if flo * fhi < 0.0 {
            let (mut a, mut b, mut fa) = (lo, hi, flo);
            for _ in 0..60 {
                let mid = 0.5 * (a + b);
                let fm = f(mid);
                if fm == 0.0 {
                    a = mid;
                    b = mid;
                    break;
                }
                if fa * fm < 0.0 {
                    b = mid;
                } else {
                    a = mid;
                    fa = fm;
                }
            }
            roots.push(0.5 * (a + b));
        }
    }
    roots
}
