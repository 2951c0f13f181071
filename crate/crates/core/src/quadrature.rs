//! Quadrature and interpolation on Chebyshev points, plus principal values.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;

/// Clenshaw–Curtis weights for the points `cos(jπ/n)`, `j = 0..=n`, on `[-1, 1]`.
pub fn clenshaw_curtis_weights(n: usize) -> Vec<f64> {
    assert!(n >= 1);
    if n == 1 {
        return vec![1.0, 1.0];
    }
    let nf = n as f64;
    let mut w = vec![0.0; n + 1];
    let mut v = vec![1.0; n - 1];
    let theta = |j: usize| PI * j as f64 / nf;
    if n % 2 == 0 {
        w[0] = 1.0 / (nf * nf - 1.0);
        w[n] = w[0];
        for k in 1..n / 2 {
            let kf = k as f64;
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * kf * theta(i + 1)).cos() / (4.0 * kf * kf - 1.0);
            }
        }
        for (i, vi) in v.iter_mut().enumerate() {
            *vi -= (nf * theta(i + 1)).cos() / (nf * nf - 1.0);
        }
    } else {
        w[0] = 1.0 / (nf * nf);
        w[n] = w[0];
        for k in 1..=(n - 1) / 2 {
            let kf = k as f64;
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * kf * theta(i + 1)).cos() / (4.0 * kf * kf - 1.0);
            }
        }
    }
    for (i, vi) in v.iter().enumerate() {
        w[i + 1] = 2.0 * vi / nf;
    }
    w
}

/// Barycentric interpolant through values at `cos(jπ/n)`, `j = 0..=n`.
pub struct ChebInterpolant<'a> {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    values: &'a [Complex64],
}

impl<'a> ChebInterpolant<'a> {
    pub fn new(values: &'a [Complex64]) -> Self {
        let n = values.len() - 1;
        let nodes = (0..=n).map(|j| (PI * j as f64 / n as f64).cos()).collect();
        let weights = (0..=n)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n {
                    0.5 * sign
                } else {
                    sign
                }
            })
            .collect();
        ChebInterpolant { nodes, weights, values }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for ((&xj, &wj), &fj) in self.nodes.iter().zip(&self.weights).zip(self.values) {
            let dx = x - xj;
            if dx == 0.0 {
                return fj;
            }
            let t = wj / dx;
            num += fj * t;
            den += t;
        }
        num / den
    }
}

/// Clenshaw–Curtis rule with `n + 1` points mapped to `[a, b]`.
pub fn clenshaw_curtis<F: FnMut(f64) -> Complex64>(a: f64, b: f64, n: usize, mut f: F) -> Complex64 {
    let w = clenshaw_curtis_weights(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (0..=n)
        .map(|j| f(mid + half * (PI * j as f64 / n as f64).cos()) * w[j])
        .sum::<Complex64>()
        * half
}

/// Principal value `p.v. ∫_a^b f` for `f` with simple poles at `poles` (all inside `(a, b)`).
///
/// Each pole gets a symmetric panel `[r - ρ, r + ρ]` on which only the even part
/// `f(r + t) + f(r - t)` is integrated; the remaining gaps are regular.
pub fn principal_value<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, poles: &[f64], degree: usize) -> f64 {
    let rule = GaussLegendre::new(NonZeroUsize::new(degree).expect("degree > 0"));
    let mut poles: Vec<f64> = poles.to_vec();
    poles.sort_by(|x, y| x.total_cmp(y));
    let mut total = 0.0;
    let mut cursor = a;
    for (i, &r) in poles.iter().enumerate() {
        let left = if i == 0 { a } else { 0.5 * (poles[i - 1] + r) };
        let right = if i + 1 == poles.len() { b } else { 0.5 * (r + poles[i + 1]) };
        let rho = (r - left).min(right - r);
        assert!(rho > 0.0, "pole {r} on the integration boundary");
        if r - rho > cursor {
            total += rule.integrate(cursor, r - rho, &f);
        }
        total += rule.integrate(0.0, rho, |t| f(r + t) + f(r - t));
        cursor = r + rho;
    }
    if b > cursor {
        total += rule.integrate(cursor, b, &f);
    }
    total
}
