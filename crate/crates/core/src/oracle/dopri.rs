//! Dormand-Prince 5(4) with local extrapolation and a PI step controller,
//! specialised to complex state vectors.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

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
/// Fifth-order solution minus the embedded fourth-order one.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub min_step: f64,
    pub max_step: f64,
}

/// Integrates y' = f(t, y) from `t0` to `t1` in place. `cap(t)` bounds the
/// step size starting at t.
pub fn integrate<F, H>(mut f: F, cap: H, y: &mut [Complex64], t0: f64, t1: f64, ctl: &StepControl) -> Result<StepStats>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
    H: Fn(f64) -> f64,
{
    let n = y.len();
    let mut stats = StepStats {
        min_step: f64::INFINITY,
        ..Default::default()
    };
    if t1 <= t0 {
        stats.min_step = 0.0;
        return Ok(stats);
    }
    let mut k = vec![vec![Complex64::new(0.0, 0.0); n]; 7];
    let mut stage = vec![Complex64::new(0.0, 0.0); n];
    let mut next = vec![Complex64::new(0.0, 0.0); n];

    let mut t = t0;
    f(t, y, &mut k[0]);
    let mut h = cap(t).min(t1 - t0).min(1e-2 * (t1 - t0).max(1e-3));
    let mut last_err = 1e-4_f64;
    while t < t1 {
        if stats.accepted + stats.rejected >= ctl.max_steps {
            return Err(Error::Convergence(format!(
                "integrator exceeded {} steps at t = {t} of {t1}",
                ctl.max_steps
            )));
        }
        h = h.min(cap(t));
        let last = t + h >= t1 - 1e-14 * t1.abs().max(1.0);
        if last {
            h = t1 - t;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, a) in A[s].iter().enumerate().take(s) {
                    if *a != 0.0 {
                        acc += k[j][i] * *a;
                    }
                }
                stage[i] = y[i] + acc * h;
            }
            f(t + C[s] * h, &stage, &mut k[s]);
        }
        // the last stage is evaluated at the fifth-order solution
        next.copy_from_slice(&stage);
        let mut err_sq = 0.0;
        for i in 0..n {
            let mut e = Complex64::new(0.0, 0.0);
            for (j, c) in E.iter().enumerate() {
                if *c != 0.0 {
                    e += k[j][i] * *c;
                }
            }
            let scale = ctl.atol + ctl.rtol * y[i].norm().max(next[i].norm());
            err_sq += (e.norm() * h / scale).powi(2);
        }
        let err = (err_sq / n as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::Convergence(format!("integrator produced non-finite state at t = {t}")));
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            y.copy_from_slice(&next);
            k.swap(0, 6);
            stats.accepted += 1;
            stats.min_step = stats.min_step.min(h);
            stats.max_step = stats.max_step.max(h);
            // PI controller (Hairer-Wanner, β = 0.04)
            let factor = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * last_err.powf(0.04);
            h *= factor.clamp(0.2, 5.0);
            last_err = err.max(1e-4);
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h < 1e-14 * (t1 - t0) {
                return Err(Error::Convergence(format!("step size underflow at t = {t}")));
            }
        }
    }
    if stats.accepted == 0 {
        stats.min_step = 0.0;
    }
    Ok(stats)
}
