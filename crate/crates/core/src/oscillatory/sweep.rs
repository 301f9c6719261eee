//! Forward adaptive sweep over [0, T] producing I±(τ) and the nested
//! M-integrals in one pass.
//!
//! Panels are laid down left to right. Each panel's length is capped so that
//! the phase of every active integrand advances by at most π/4 across it;
//! inside the cap a G7/K15 pair supplies the error estimate and panels that
//! miss their share of the tolerance are bisected. Running values of I± at
//! the interior nodes come from the spectral integration matrices, so
//! M = ∫ I_inner(τ) conj(f_outer(τ)) dτ is accumulated without re-integration.

use num_complex::Complex64;

use super::rules::{gauss_index, GAUSS_PARTIAL, GAUSS_WEIGHTS, KRONROD_NODES, KRONROD_PARTIAL, KRONROD_WEIGHTS};
use super::{QuadratureOptions, Sign, PHASE_ADVANCE_CAP};
use crate::cavity::CavityConfig;
use crate::error::{Error, Result};
use crate::worldline::TrajectorySegment;

const MAX_DEPTH: usize = 40;
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Running state of a sweep at a requested proper time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub tau: f64,
    /// I±(τ), indexed by [`Sign::index`].
    pub integrals: [Complex64; 2],
    pub errors: [f64; 2],
    /// `m[outer][inner]` = ∫₀^τ I_inner (d/dτ' I_outer)* dτ'.
    pub m: [[Complex64; 2]; 2],
    pub m_errors: [[f64; 2]; 2],
}

impl Checkpoint {
    fn origin() -> Self {
        Self {
            tau: 0.0,
            integrals: [ZERO; 2],
            errors: [0.0; 2],
            m: [[ZERO; 2]; 2],
            m_errors: [[0.0; 2]; 2],
        }
    }
}

/// One accepted quadrature panel, kept for step audits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub mode: usize,
    pub last: Checkpoint,
    pub checkpoints: Vec<Checkpoint>,
    /// Integrand evaluations per active sign.
    pub evaluations: usize,
    pub panels: Vec<Panel>,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepRequest<'a> {
    pub segment: &'a TrajectorySegment,
    pub cavity: &'a CavityConfig,
    pub mode: usize,
    pub signs: &'a [Sign],
    pub with_m: bool,
    pub record_panels: bool,
}

struct Sweeper<'a> {
    seg: &'a TrajectorySegment,
    omega_gap: f64,
    omega: f64,
    k: f64,
    active: [bool; 2],
    with_m: bool,
    record_panels: bool,
    tol: f64,
    budget: usize,
    span: f64,
    state: Checkpoint,
    evaluations: usize,
    panels: Vec<Panel>,
}

impl<'a> Sweeper<'a> {
    #[inline]
    fn values_at(&self, tau: f64) -> [Complex64; 2] {
        let ev = self.seg.event_unchecked(tau);
        let envelope = (self.k * ev.x).sin();
        let field = Complex64::from_polar(envelope, self.omega * ev.t);
        let qubit = Complex64::from_polar(1.0, self.omega_gap * tau);
        [field * qubit, field * qubit.conj()]
    }

    /// Upper bound on the instantaneous phase rate over all active signs.
    /// Includes the envelope sin(k x(τ)), whose phase moves at k|sinh aτ|.
    fn phase_rate(&self, tau: f64) -> f64 {
        let u = self.seg.proper_acceleration() * tau;
        let dilation = u.cosh();
        let envelope = self.k * u.sinh().abs();
        Sign::BOTH
            .iter()
            .filter(|s| self.active[s.index()])
            .map(|s| (s.value() * self.omega_gap + self.omega * dilation).abs() + envelope)
            .fold(0.0, f64::max)
    }

    fn step(&self, tau: f64, stop: f64) -> f64 {
        let remaining = stop - tau;
        let rate = self.phase_rate(tau).max(self.phase_rate(stop));
        if rate * remaining <= PHASE_ADVANCE_CAP {
            return remaining;
        }
        // rate is non-decreasing in τ, so one shrink from the far end suffices
        // the shrink keeps r·h under the cap despite rounding in cap/r
        const SHRINK: f64 = 1.0 - 1e-12;
        let mut h = SHRINK * PHASE_ADVANCE_CAP / rate;
        loop {
            let r = self.phase_rate(tau).max(self.phase_rate(tau + h));
            if r * h <= PHASE_ADVANCE_CAP {
                return h.min(remaining);
            }
            h = SHRINK * PHASE_ADVANCE_CAP / r;
        }
    }

    fn budget_error(&self) -> Error {
        let idx = if self.active[1] { 1 } else { 0 };
        Error::Accuracy {
            best: self.state.integrals[idx],
            error: self.state.errors[idx],
            target: self.tol,
            evaluations: self.evaluations,
        }
    }

    fn panel(&mut self, a: f64, b: f64, depth: usize) -> Result<()> {
        if self.evaluations + 15 > self.budget {
            return Err(self.budget_error());
        }
        self.evaluations += 15;

        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut f = [[ZERO; 15]; 2];
        for (k, x) in KRONROD_NODES.iter().enumerate() {
            let v = self.values_at(mid + half * x);
            f[0][k] = v[0];
            f[1][k] = v[1];
        }

        let mut ik = [ZERO; 2];
        let mut err_i = [0.0; 2];
        let mut partial_k = [[ZERO; 15]; 2];
        let mut partial_g = [[ZERO; 7]; 2];
        for s in 0..2 {
            if !self.active[s] {
                continue;
            }
            let k15: Complex64 = (0..15).map(|k| f[s][k] * KRONROD_WEIGHTS[k]).sum::<Complex64>() * half;
            let g7: Complex64 = (0..7)
                .map(|i| f[s][gauss_index(i)] * GAUSS_WEIGHTS[i])
                .sum::<Complex64>()
                * half;
            ik[s] = k15;
            err_i[s] = (k15 - g7).norm();
            if self.with_m {
                for k in 0..15 {
                    partial_k[s][k] = (0..15).map(|m| f[s][m] * KRONROD_PARTIAL[k][m]).sum::<Complex64>() * half;
                }
                for i in 0..7 {
                    partial_g[s][i] = (0..7)
                        .map(|m| f[s][gauss_index(m)] * GAUSS_PARTIAL[i][m])
                        .sum::<Complex64>()
                        * half;
                }
            }
        }

        let mut mk = [[ZERO; 2]; 2];
        let mut err_m = [[0.0; 2]; 2];
        if self.with_m {
            for outer in 0..2 {
                for inner in 0..2 {
                    if !(self.active[outer] && self.active[inner]) {
                        continue;
                    }
                    let base = self.state.integrals[inner];
                    let k15: Complex64 = (0..15)
                        .map(|k| (base + partial_k[inner][k]) * f[outer][k].conj() * KRONROD_WEIGHTS[k])
                        .sum::<Complex64>()
                        * half;
                    let g7: Complex64 = (0..7)
                        .map(|i| {
                            (base + partial_g[inner][i]) * f[outer][gauss_index(i)].conj() * GAUSS_WEIGHTS[i]
                        })
                        .sum::<Complex64>()
                        * half;
                    mk[outer][inner] = k15;
                    err_m[outer][inner] = (k15 - g7).norm();
                }
            }
        }

        let worst = err_i
            .iter()
            .chain(err_m.iter().flatten())
            .fold(0.0_f64, |acc, e| acc.max(*e));
        let allowed = self.tol * (b - a) / self.span;
        let tiny = b - a <= self.span * 1e-13;
        if worst <= allowed || depth >= MAX_DEPTH || tiny {
            for s in 0..2 {
                self.state.integrals[s] += ik[s];
                self.state.errors[s] += err_i[s];
                for inner in 0..2 {
                    self.state.m[s][inner] += mk[s][inner];
                    self.state.m_errors[s][inner] += err_m[s][inner];
                }
            }
            if self.record_panels {
                self.panels.push(Panel { start: a, end: b });
            }
            Ok(())
        } else {
            self.panel(a, mid, depth + 1)?;
            self.panel(mid, b, depth + 1)
        }
    }
}

/// Sweeps `[0, end]`, recording the running state at each time in
/// `checkpoints` (which must be sorted and lie in `[0, end]`).
pub fn sweep(
    req: SweepRequest<'_>,
    end: f64,
    checkpoints: &[f64],
    opts: &QuadratureOptions,
) -> Result<SweepOutput> {
    let seg = req.segment;
    let cfg = req.cavity;
    opts.validate()?;
    if !(0.0..=seg.duration).contains(&end) {
        return Err(Error::Domain(format!(
            "integration end {end} outside segment [0, {}]",
            seg.duration
        )));
    }
    if checkpoints.windows(2).any(|w| w[0] > w[1])
        || checkpoints.iter().any(|t| !(0.0..=end).contains(t))
    {
        return Err(Error::Domain("checkpoints must be sorted and inside [0, end]".into()));
    }
    let k = cfg.wavenumber(req.mode)?;
    // x(τ) is monotone on a segment, so checking both ends covers the interior
    cfg.ensure_inside(seg.event_unchecked(0.0).x, 0.0)?;
    cfg.ensure_inside(seg.event_unchecked(end).x, end)?;

    let mut active = [false; 2];
    for s in req.signs {
        active[s.index()] = true;
    }

    let mut sw = Sweeper {
        seg,
        omega_gap: cfg.omega_gap,
        omega: k,
        k,
        active,
        with_m: req.with_m,
        record_panels: req.record_panels,
        tol: opts.tol,
        budget: opts.max_evaluations,
        span: end,
        state: Checkpoint::origin(),
        evaluations: 0,
        panels: Vec::new(),
    };

    let mut recorded = Vec::with_capacity(checkpoints.len());
    let mut pending = checkpoints.iter().copied().peekable();
    let mut tau = 0.0;
    loop {
        while let Some(&cp) = pending.peek() {
            if cp <= tau {
                let mut c = sw.state;
                c.tau = cp;
                recorded.push(c);
                pending.next();
            } else {
                break;
            }
        }
        if tau >= end {
            break;
        }
        let stop = pending.peek().copied().unwrap_or(end).min(end);
        let h = sw.step(tau, stop);
        let next = if tau + h >= stop - 1e-15 * stop.abs().max(1.0) { stop } else { tau + h };
        sw.panel(tau, next, 0)?;
        tau = next;
        sw.state.tau = tau;
    }

    let total_error = sw
        .state
        .errors
        .iter()
        .chain(sw.state.m_errors.iter().flatten())
        .fold(0.0_f64, |a, e| a.max(*e));
    if total_error > opts.tol {
        return Err(Error::Accuracy {
            best: sw.state.integrals[if active[1] { 1 } else { 0 }],
            error: total_error,
            target: opts.tol,
            evaluations: sw.evaluations,
        });
    }

    Ok(SweepOutput {
        mode: req.mode,
        last: sw.state,
        checkpoints: recorded,
        evaluations: sw.evaluations,
        panels: sw.panels,
    })
}
