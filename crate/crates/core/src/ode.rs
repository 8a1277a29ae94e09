//! Dormand–Prince 5(4) with step-size control, for complex state vectors.
//!
//! Integration may run in either direction. A post-step hook lets callers renormalize or
//! project the state after every accepted step.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step magnitude allowed at a given abscissa.
    pub max_step: fn(f64) -> f64,
    pub min_step: f64,
    pub max_steps: usize,
    pub initial_step: Option<f64>,
}

fn unbounded(_: f64) -> f64 {
    f64::INFINITY
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: unbounded,
            min_step: 1e-14,
            max_steps: 2_000_000,
            initial_step: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// difference between 5th and embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate `y' = f(t, y)` from `t0` to `t1`, stopping exactly at each point of `stops`
/// (which must lie between t0 and t1 and be ordered in the direction of integration).
///
/// `on_step(t, y)` runs after every accepted step and may modify `y`; returning `Err`
/// aborts the integration. `at_stop(t, y)` runs at each stop point and at t1.
#[allow(clippy::too_many_arguments)]
pub fn integrate<F, S, P>(
    mut f: F,
    t0: f64,
    y0: &[Complex64],
    t1: f64,
    stops: &[f64],
    opts: &OdeOptions,
    mut on_step: S,
    mut at_stop: P,
) -> Result<(Vec<Complex64>, OdeStats)>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
    S: FnMut(f64, &mut [Complex64]) -> Result<()>,
    P: FnMut(f64, &[Complex64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut stats = OdeStats::default();
    if t1 == t0 {
        at_stop(t0, &y);
        return Ok((y, stats));
    }
    let dir = (t1 - t0).signum();
    let mut k: [Vec<Complex64>; 7] = std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); n]);
    let mut tmp = vec![Complex64::new(0.0, 0.0); n];
    let mut y5 = vec![Complex64::new(0.0, 0.0); n];

    let mut t = t0;
    f(t, &y, &mut k[0]);
    stats.evaluations += 1;

    let mut h = match opts.initial_step {
        Some(h) => h.abs(),
        None => {
            let ny = y.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let nf = k[0].iter().map(|v| v.norm()).fold(0.0, f64::max);
            let scale = opts.atol + opts.rtol * ny;
            if nf > 0.0 {
                (0.01 * scale / nf).max(1e-6 * (t1 - t0).abs())
            } else {
                1e-3 * (t1 - t0).abs()
            }
        }
    };

    let mut stop_iter = stops.iter().copied().chain(std::iter::once(t1)).peekable();
    let mut next_stop = *stop_iter.peek().expect("t1 always present");

    while stats.accepted + stats.rejected < opts.max_steps {
        let cap = (opts.max_step)(t).abs();
        h = h.min(cap);
        let h_free = h;
        let remaining = (next_stop - t) * dir;
        let mut hit = false;
        if h >= remaining * (1.0 - 1e-12) {
            h = remaining;
            hit = true;
        }
        if h < opts.min_step * t.abs().max(1.0) && !hit {
            return Err(Error::Integration {
                s: t,
                reason: format!("step size {h:.3e} underflow"),
            });
        }
        let hs = h * dir;

        for i in 0..n {
            tmp[i] = y[i] + hs * A21 * k[0][i];
        }
        let (head, tail) = k.split_at_mut(1);
        f(t + C2 * hs, &tmp, &mut tail[0]);
        for i in 0..n {
            tmp[i] = y[i] + hs * (A31 * head[0][i] + A32 * tail[0][i]);
        }
        f(t + C3 * hs, &tmp, &mut tail[1]);
        for i in 0..n {
            tmp[i] = y[i] + hs * (A41 * head[0][i] + A42 * tail[0][i] + A43 * tail[1][i]);
        }
        f(t + C4 * hs, &tmp, &mut tail[2]);
        for i in 0..n {
            tmp[i] = y[i]
                + hs * (A51 * head[0][i] + A52 * tail[0][i] + A53 * tail[1][i] + A54 * tail[2][i]);
        }
        f(t + C5 * hs, &tmp, &mut tail[3]);
        for i in 0..n {
            tmp[i] = y[i]
                + hs * (A61 * head[0][i]
                    + A62 * tail[0][i]
                    + A63 * tail[1][i]
                    + A64 * tail[2][i]
                    + A65 * tail[3][i]);
        }
        f(t + hs, &tmp, &mut tail[4]);
        for i in 0..n {
            y5[i] = y[i]
                + hs * (B1 * head[0][i]
                    + B3 * tail[1][i]
                    + B4 * tail[2][i]
                    + B5 * tail[3][i]
                    + B6 * tail[4][i]);
        }
        f(t + hs, &y5, &mut tail[5]);
        stats.evaluations += 6;

        let mut err = 0.0f64;
        for i in 0..n {
            let e = hs
                * (E1 * head[0][i]
                    + E3 * tail[1][i]
                    + E4 * tail[2][i]
                    + E5 * tail[3][i]
                    + E6 * tail[4][i]
                    + E7 * tail[5][i]);
            let sc = opts.atol + opts.rtol * y[i].norm().max(y5[i].norm());
            err = err.max(e.norm() / sc);
        }
        if !err.is_finite() {
            stats.rejected += 1;
            h *= 0.2;
            continue;
        }
        if err <= 1.0 {
            stats.accepted += 1;
            t = if hit { next_stop } else { t + hs };
            y.copy_from_slice(&y5);
            on_step(t, &mut y)?;
            if hit {
                at_stop(t, &y);
                stop_iter.next();
                match stop_iter.peek() {
                    Some(&s) => next_stop = s,
                    None => return Ok((y, stats)),
                }
            }
            f(t, &y, &mut k[0]);
            stats.evaluations += 1;
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = if hit { h_free.max(h * fac) } else { h * fac };
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    Err(Error::Integration {
        s: t,
        reason: format!("exceeded {} steps", opts.max_steps),
    })
}
