//! Adaptive Dormand–Prince 5(4) integrator for small complex systems.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub atol: f64,
    pub rtol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { atol: 1e-10, rtol: 1e-10, max_steps: 200_000 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t1` and returns `y(t1)`.
pub fn integrate<const D: usize, F>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: [Complex64; D],
    opts: OdeOptions,
) -> Result<([Complex64; D], OdeStats)>
where
    F: FnMut(f64, &[Complex64; D]) -> [Complex64; D],
{
    let zero = Complex64::new(0.0, 0.0);
    let span = t1 - t0;
    if span == 0.0 {
        return Ok((y0, OdeStats { accepted: 0, rejected: 0 }));
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    let mut h = dir * span.abs() * 1e-3;
    let mut stats = OdeStats { accepted: 0, rejected: 0 };
    let mut k = [[zero; D]; 7];
    k[0] = f(t, &y);
    while (t1 - t) * dir > 0.0 {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::numerical("ode", format!("step budget of {} exhausted at t = {t}", opts.max_steps)));
        }
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }
        for s in 1..7 {
            let mut ys = y;
            for (i, yi) in ys.iter_mut().enumerate() {
                for (j, kj) in k.iter().enumerate().take(s) {
                    *yi += kj[i] * (h * A[s][j]);
                }
            }
            k[s] = f(t + C[s] * h, &ys);
        }
        let mut y_new = y;
        let mut err = 0.0f64;
        for i in 0..D {
            let mut hi = zero;
            let mut lo = zero;
            for s in 0..7 {
                hi += k[s][i] * B5[s];
                lo += k[s][i] * B4[s];
            }
            y_new[i] = y[i] + hi * h;
            let sc = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
            err = err.max(((hi - lo) * h).norm() / sc);
        }
        if !err.is_finite() || y_new.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::numerical("ode", format!("non-finite state near t = {t}")));
        }
        if err <= 1.0 {
            t += h;
            y = y_new;
            k[0] = k[6];
            stats.accepted += 1;
        } else {
            stats.rejected += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h.abs() < 1e-14 * span.abs() {
            return Err(Error::numerical("ode", format!("step size underflow near t = {t}")));
        }
    }
    Ok((y, stats))
}
