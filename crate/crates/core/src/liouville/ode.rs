//! Dormand–Prince 5(4) integrator with step-size control and the
//! fourth-order continuous extension for output between steps.
//!
//! The state is a complex vector; callers that need real accumulators store
//! them in the real part of extra components.

use crate::error::{Error, Result};
use crate::linalg::{CVec, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step, ps.
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rel_tol: 1e-8, abs_tol: 1e-10, max_step: f64::INFINITY, max_steps: 50_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Result of an integration: where it ended and the state there.
#[derive(Debug)]
pub(crate) struct OdeEnd {
    pub t: f64,
    pub y: CVec,
    pub stats: OdeStats,
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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// `out = y + h Σ a_i k_i`.
fn combine(out: &mut CVec, y: &CVec, h: f64, terms: &[(f64, &CVec)]) {
    out.copy_from(y);
    for (a, k) in terms {
        if *a != 0.0 {
            out.axpy(C64::new(h * a, 0.0), k, C64::new(1.0, 0.0));
        }
    }
}

fn error_norm(err: &CVec, y0: &CVec, y1: &CVec, opts: &OdeOptions) -> f64 {
    let n = err.len().max(1) as f64;
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1.iter()))
        .map(|(e, (a, b))| {
            let scale = opts.abs_tol + opts.rel_tol * a.norm().max(b.norm());
            (e.norm() / scale).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

/// Integrates `y' = f(t, y)` from `t = 0` to `t_end`.
///
/// `on_grid` receives the interpolated state at every time in `grid` (sorted,
/// within `[0, t_end]`). After each accepted step `stop(t, y)` may end the
/// integration early; grid points past that time are not reported.
pub(crate) fn integrate<F, O, S>(
    mut rhs: F,
    y0: CVec,
    t_end: f64,
    grid: &[f64],
    opts: &OdeOptions,
    mut on_grid: O,
    mut stop: S,
) -> Result<OdeEnd>
where
    F: FnMut(f64, &CVec, &mut CVec),
    O: FnMut(f64, &CVec),
    S: FnMut(f64, &CVec) -> bool,
{
    let dim = y0.len();
    let mut stats = OdeStats::default();
    let mut t = 0.0;
    let mut y = y0;
    let mut next_grid = 0;
    while next_grid < grid.len() && grid[next_grid] <= 0.0 {
        on_grid(grid[next_grid], &y);
        next_grid += 1;
    }
    if t_end <= 0.0 {
        return Ok(OdeEnd { t, y, stats });
    }

    let mut k1 = CVec::zeros(dim);
    let mut k2 = CVec::zeros(dim);
    let mut k3 = CVec::zeros(dim);
    let mut k4 = CVec::zeros(dim);
    let mut k5 = CVec::zeros(dim);
    let mut k6 = CVec::zeros(dim);
    let mut k7 = CVec::zeros(dim);
    let mut tmp = CVec::zeros(dim);
    let mut y1 = CVec::zeros(dim);
    let mut err = CVec::zeros(dim);

    rhs(t, &y, &mut k1);
    stats.evaluations += 1;

    let mut h = initial_step(&mut rhs, &y, &k1, t_end, opts, &mut tmp, &mut k2);
    stats.evaluations += 1;
    let mut last_rejected = false;

    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Integrator { time: t, reason: format!("exceeded {} steps", opts.max_steps) });
        }
        h = h.min(opts.max_step).min(t_end - t);
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::Integrator { time: t, reason: format!("step size underflow (h = {h:e})") });
        }

        combine(&mut tmp, &y, h, &[(A21, &k1)]);
        rhs(t + C2 * h, &tmp, &mut k2);
        combine(&mut tmp, &y, h, &[(A31, &k1), (A32, &k2)]);
        rhs(t + C3 * h, &tmp, &mut k3);
        combine(&mut tmp, &y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        rhs(t + C4 * h, &tmp, &mut k4);
        combine(&mut tmp, &y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        rhs(t + C5 * h, &tmp, &mut k5);
        combine(&mut tmp, &y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        rhs(t + h, &tmp, &mut k6);
        combine(&mut y1, &y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        rhs(t + h, &y1, &mut k7);
        stats.evaluations += 6;

        err.fill(C64::new(0.0, 0.0));
        for (a, k) in [(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)] {
            err.axpy(C64::new(h * a, 0.0), k, C64::new(1.0, 0.0));
        }
        let e = error_norm(&err, &y, &y1, opts);
        if !e.is_finite() {
            return Err(Error::Integrator { time: t, reason: "non-finite state".into() });
        }

        if e <= 1.0 {
            stats.accepted += 1;
            let t_new = t + h;
            while next_grid < grid.len() && grid[next_grid] <= t_new {
                let theta = (grid[next_grid] - t) / h;
                let y_out = dense_output(&y, &y1, h, theta, [&k1, &k3, &k4, &k5, &k6, &k7]);
                on_grid(grid[next_grid], &y_out);
                next_grid += 1;
            }
            t = t_new;
            std::mem::swap(&mut y, &mut y1);
            std::mem::swap(&mut k1, &mut k7);
            if t >= t_end || stop(t, &y) {
                return Ok(OdeEnd { t, y, stats });
            }
            let mut factor = 0.9 * e.max(1e-10).powf(-0.2);
            factor = factor.clamp(0.2, 10.0);
            if last_rejected {
                factor = factor.min(1.0);
            }
            h *= factor;
            last_rejected = false;
        } else {
            stats.rejected += 1;
            h *= (0.9 * e.powf(-0.2)).max(0.2);
            last_rejected = true;
        }
    }
}

fn dense_output(y0: &CVec, y1: &CVec, h: f64, theta: f64, k: [&CVec; 6]) -> CVec {
    let [k1, k3, k4, k5, k6, k7] = k;
    let th1 = 1.0 - theta;
    let mut out = y0.clone();
    for i in 0..y0.len() {
        let r2 = y1[i] - y0[i];
        let r3 = k1[i] * h - r2;
        let r4 = r2 - k7[i] * h - r3;
        let r5 = (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * h;
        out[i] = y0[i] + (r2 + (r3 + (r4 + r5 * th1) * theta) * th1) * theta;
    }
    out
}

fn initial_step<F>(rhs: &mut F, y: &CVec, f0: &CVec, t_end: f64, opts: &OdeOptions, tmp: &mut CVec, f1: &mut CVec) -> f64
where
    F: FnMut(f64, &CVec, &mut CVec),
{
    let scale = |v: &CVec, r: &CVec| -> f64 {
        let n = v.len().max(1) as f64;
        (v.iter()
            .zip(r.iter())
            .map(|(a, b)| (a.norm() / (opts.abs_tol + opts.rel_tol * b.norm())).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
    };
    let d0 = scale(y, y);
    let d1 = scale(f0, y);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(t_end).min(opts.max_step);
    combine(tmp, y, h0, &[(1.0, f0)]);
    rhs(h0, tmp, f1);
    let diff = f1.clone() - f0;
    let d2 = scale(&diff, y) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(t_end).min(opts.max_step)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_and_rotation() {
        // y' = λ y with complex λ, compared against the exact solution on a grid.
        let lambda = C64::new(-0.3, 2.0);
        let grid: Vec<f64> = (0..=40).map(|k| k as f64 * 0.25).collect();
        let mut seen = Vec::new();
        let opts = OdeOptions::default();
        let end = integrate(
            |_, y, dy| dy[0] = lambda * y[0],
            CVec::from_element(1, C64::new(1.0, 0.0)),
            10.0,
            &grid,
            &opts,
            |t, y| seen.push((t, y[0])),
            |_, _| false,
        )
        .unwrap();
        assert_eq!(seen.len(), grid.len());
        for (t, v) in seen {
            let exact = (lambda * t).exp();
            assert!((v - exact).norm() < 1e-7, "t = {t}: {v} vs {exact}");
        }
        assert!((end.y[0] - (lambda * 10.0).exp()).norm() < 1e-7);
        assert_eq!(end.t, 10.0);
    }

    #[test]
    fn polynomial_time_dependence() {
        // y' = 3t² + 1, y(0) = 0 → y = t³ + t; dense output is exact to rounding.
        let grid = [0.0, 0.3, 1.7, 2.0];
        let mut seen = Vec::new();
        integrate(
            |t, _, dy| dy[0] = C64::new(3.0 * t * t + 1.0, 0.0),
            CVec::zeros(1),
            2.0,
            &grid,
            &OdeOptions::default(),
            |t, y| seen.push((t, y[0].re)),
            |_, _| false,
        )
        .unwrap();
        for (t, v) in seen {
            assert!((v - (t * t * t + t)).abs() < 1e-10);
        }
    }

    #[test]
    fn early_stop() {
        let end = integrate(
            |_, y, dy| dy[0] = -y[0],
            CVec::from_element(1, C64::new(1.0, 0.0)),
            100.0,
            &[],
            &OdeOptions::default(),
            |_, _| {},
            |_, y| y[0].re < 1e-3,
        )
        .unwrap();
        assert!(end.t < 100.0 && end.y[0].re < 1e-3);
    }

    #[test]
    fn step_budget_is_an_error_with_time() {
        let opts = OdeOptions { max_steps: 5, ..OdeOptions::default() };
        let err = integrate(
            |_, y, dy| dy[0] = y[0] * C64::new(0.0, 100.0),
            CVec::from_element(1, C64::new(1.0, 0.0)),
            100.0,
            &[],
            &opts,
            |_, _| {},
            |_, _| false,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Integrator { .. }));
    }
}
