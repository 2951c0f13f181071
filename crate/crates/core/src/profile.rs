//! Built-in shear profiles as closed-form entire functions.
//!
//! Every profile is evaluated through its analytic expression so it can be
//! sampled on complex contours. Discretizations work in a canonical variable
//! `s` (`[-1, 1]` on a segment, `[0, 2π)` on a circle); [`ShearProfile::eval_canonical`]
//! applies the affine change of variable and the matching derivative factors.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical domain of the flow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Segment { a: f64, b: f64 },
    Circle { period: f64 },
}

impl Domain {
    pub fn segment(a: f64, b: f64) -> Self {
        Domain::Segment { a, b }
    }

    pub fn unit_segment() -> Self {
        Domain::Segment { a: -1.0, b: 1.0 }
    }

    pub fn circle(period: f64) -> Self {
        Domain::Circle { period }
    }

    pub fn standard_circle() -> Self {
        Domain::Circle { period: 2.0 * PI }
    }

    pub fn is_circle(&self) -> bool {
        matches!(self, Domain::Circle { .. })
    }

    /// Scale `h` of the affine map from the canonical variable to `x`.
    pub fn scale(&self) -> f64 {
        match *self {
            Domain::Segment { a, b } => 0.5 * (b - a),
            Domain::Circle { period } => period / (2.0 * PI),
        }
    }

    fn offset(&self) -> f64 {
        match *self {
            Domain::Segment { a, b } => 0.5 * (a + b),
            Domain::Circle { .. } => 0.0,
        }
    }

    /// Physical coordinate of canonical point `s`.
    pub fn to_physical(&self, s: Complex64) -> Complex64 {
        s * self.scale() + self.offset()
    }

    fn check(&self) -> Result<()> {
        match *self {
            Domain::Segment { a, b } if !(a.is_finite() && b.is_finite() && a < b) => Err(
                Error::Profile(format!("segment needs finite a < b, got [{a}, {b}]")),
            ),
            Domain::Circle { period } if !(period.is_finite() && period > 0.0) => Err(
                Error::Profile(format!("circle needs period L > 0, got {period}")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    /// `U(x) = x`.
    Couette,
    /// `U(x) = (1-θ) x + θ (1-x²)`.
    CouettePoiseuille { theta: f64 },
    /// `U(x) = sin(ω x + θ)`.
    Trig { omega: f64, theta: f64 },
    /// `U(x) = sin(k x)` on a circle.
    Kolmogorov { k: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShearProfile {
    pub kind: ProfileKind,
    pub domain: Domain,
}

impl ShearProfile {
    pub fn new(kind: ProfileKind, domain: Domain) -> Result<Self> {
        domain.check()?;
        match kind {
            ProfileKind::Couette => {}
            ProfileKind::CouettePoiseuille { theta } => {
                if !theta.is_finite() {
                    return Err(Error::Profile(format!("theta must be finite, got {theta}")));
                }
            }
            ProfileKind::Trig { omega, theta } => {
                if !(omega.is_finite() && theta.is_finite()) || omega == 0.0 {
                    return Err(Error::Profile(format!(
                        "trig needs finite omega != 0 and theta, got omega={omega}, theta={theta}"
                    )));
                }
            }
            ProfileKind::Kolmogorov { k } => {
                if k == 0 {
                    return Err(Error::Profile("kolmogorov needs integer k > 0".into()));
                }
            }
        }
        if let Domain::Circle { period } = domain {
            let omega = match kind {
                ProfileKind::Trig { omega, .. } => omega,
                ProfileKind::Kolmogorov { k } => k as f64,
                _ => {
                    return Err(Error::Profile(
                        "only trig and kolmogorov profiles are periodic".into(),
                    ))
                }
            };
            let turns = omega * period / (2.0 * PI);
            if (turns - turns.round()).abs() > 1e-10 {
                return Err(Error::Profile(format!(
                    "profile with frequency {omega} is not periodic with period {period}"
                )));
            }
        } else if matches!(kind, ProfileKind::Kolmogorov { .. }) {
            return Err(Error::Profile("kolmogorov flows live on a circle".into()));
        }
        Ok(ShearProfile { kind, domain })
    }

    pub fn couette() -> Self {
        ShearProfile {
            kind: ProfileKind::Couette,
            domain: Domain::unit_segment(),
        }
    }

    pub fn cosine(omega: f64) -> Self {
        ShearProfile {
            kind: ProfileKind::Trig {
                omega,
                theta: 0.5 * PI,
            },
            domain: Domain::unit_segment(),
        }
    }

    pub fn kolmogorov(k: u32) -> Self {
        ShearProfile {
            kind: ProfileKind::Kolmogorov { k },
            domain: Domain::standard_circle(),
        }
    }

    /// `U`, `U'` or `U''` at a complex physical point.
    pub fn eval(&self, z: Complex64, order: u8) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        match self.kind {
            ProfileKind::Couette => match order {
                0 => z,
                1 => one,
                _ => Complex64::new(0.0, 0.0),
            },
            ProfileKind::CouettePoiseuille { theta } => match order {
                0 => z * (1.0 - theta) + (one - z * z) * theta,
                1 => Complex64::new(1.0 - theta, 0.0) - z * (2.0 * theta),
                _ => Complex64::new(-2.0 * theta, 0.0),
            },
            ProfileKind::Trig { omega, theta } => trig_eval(omega, theta, z, order),
            ProfileKind::Kolmogorov { k } => trig_eval(k as f64, 0.0, z, order),
        }
    }

    /// Derivative of order `order` with respect to the canonical variable.
    pub fn eval_canonical(&self, s: Complex64, order: u8) -> Complex64 {
        let h = self.domain.scale();
        self.eval(self.domain.to_physical(s), order) * h.powi(order as i32)
    }

    /// Values at the real endpoints `(U(a), U(b))`; `None` on a circle.
    pub fn boundary_values(&self) -> Option<(f64, f64)> {
        match self.domain {
            Domain::Segment { a, b } => Some((
                self.eval(Complex64::new(a, 0.0), 0).re,
                self.eval(Complex64::new(b, 0.0), 0).re,
            )),
            Domain::Circle { .. } => None,
        }
    }

    /// Short identifier for metadata and file headers.
    pub fn id(&self) -> String {
        let kind = match self.kind {
            ProfileKind::Couette => "couette".to_string(),
            ProfileKind::CouettePoiseuille { theta } => format!("couette_poiseuille(theta={theta})"),
            ProfileKind::Trig { omega, theta } => format!("trig(omega={omega},theta={theta})"),
            ProfileKind::Kolmogorov { k } => format!("kolmogorov(k={k})"),
        };
        match self.domain {
            Domain::Segment { a, b } => format!("{kind}@segment[{a},{b}]"),
            Domain::Circle { period } => format!("{kind}@circle[{period}]"),
        }
    }
}

impl fmt::Display for ShearProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

fn trig_eval(omega: f64, theta: f64, z: Complex64, order: u8) -> Complex64 {
    let arg = z * omega + theta;
    match order {
        0 => arg.sin(),
        1 => arg.cos() * omega,
        _ => -arg.sin() * (omega * omega),
    }
}

/// Builds a profile from a kind name and named scalar parameters.
pub fn make_profile(kind: &str, params: &BTreeMap<String, f64>, domain: Domain) -> Result<ShearProfile> {
    let get = |name: &str| {
        params
            .get(name)
            .copied()
            .ok_or_else(|| Error::Profile(format!("{kind} profile needs parameter `{name}`")))
    };
    let allowed: &[&str] = match kind {
        "couette" => &[],
        "couette_poiseuille" => &["theta"],
        "trig" => &["omega", "theta"],
        "kolmogorov" => &["k"],
        other => return Err(Error::Profile(format!("unknown profile kind `{other}`"))),
    };
    if let Some(extra) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::Profile(format!("{kind} profile has no parameter `{extra}`")));
    }
    let parsed = match kind {
        "couette" => ProfileKind::Couette,
        "couette_poiseuille" => ProfileKind::CouettePoiseuille { theta: get("theta")? },
        "trig" => ProfileKind::Trig {
            omega: get("omega")?,
            theta: params.get("theta").copied().unwrap_or(0.0),
        },
        _ => {
            let k = get("k")?;
            if !(k > 0.0 && k.fract() == 0.0 && k <= u32::MAX as f64) {
                return Err(Error::Profile(format!("kolmogorov k must be a positive integer, got {k}")));
            }
            ProfileKind::Kolmogorov { k: k as u32 }
        }
    };
    ShearProfile::new(parsed, domain)
}
