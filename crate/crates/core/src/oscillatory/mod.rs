//! Phase integrals along a worldline,
//!
//! ```text
//! I±,j(T) = ∫₀ᵀ exp(i[±Ωτ + ω_j t(τ)]) sin(k_j x(τ)) dτ
//! ```
//!
//! and the nested integrals M_{j,s,s'} = ∫₀ᵀ I_{s',j}(τ) (d/dτ) I_{s,j}(τ)* dτ.
//!
//! On an accelerated worldline the phase rate grows like cosh(aτ), so the
//! quadrature caps the phase advance per panel instead of trusting a fixed
//! grid.

pub mod rules;
mod sweep;

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::CavityConfig;
use crate::error::{Error, Result};
use crate::worldline::TrajectorySegment;

pub use sweep::{sweep, Checkpoint, Panel, SweepOutput, SweepRequest};

/// Largest phase advance allowed across one quadrature panel.
pub const PHASE_ADVANCE_CAP: f64 = std::f64::consts::FRAC_PI_4;
/// Environment variable overriding the per-integral evaluation budget.
pub const MAX_EVALS_ENV: &str = "ACCELGATES_MAX_EVALS";

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_EVALUATIONS: usize = 10_000_000;

/// Which exponent sign: `+` is the counter-rotating partner of the
/// atom's excitation, `-` the rotating one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Sign::Plus => 0,
            Sign::Minus => 1,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureOptions {
    /// Absolute error target per integral.
    pub tol: f64,
    /// Integrand evaluations allowed per integral.
    pub max_evaluations: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_evaluations: DEFAULT_MAX_EVALUATIONS,
        }
    }
}

impl QuadratureOptions {
    /// Defaults, with the budget taken from `ACCELGATES_MAX_EVALS` when set.
    pub fn from_env() -> Self {
        let mut opts = Self::default();
        if let Some(n) = std::env::var(MAX_EVALS_ENV).ok().and_then(|v| v.trim().parse().ok()) {
            opts.max_evaluations = n;
        }
        opts
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidConfig(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_evaluations == 0 {
            return Err(Error::InvalidConfig("evaluation budget must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseIntegral {
    pub value: Complex64,
    pub abs_error: f64,
    pub evaluations: usize,
}

/// The four nested integrals of one mode, `get(outer, inner)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MIntegrals {
    values: [[Complex64; 2]; 2],
    errors: [[f64; 2]; 2],
}

impl MIntegrals {
    pub fn new(values: [[Complex64; 2]; 2], errors: [[f64; 2]; 2]) -> Self {
        Self { values, errors }
    }

    pub fn zero() -> Self {
        Self::new([[Complex64::new(0.0, 0.0); 2]; 2], [[0.0; 2]; 2])
    }

    pub fn get(&self, outer: Sign, inner: Sign) -> Complex64 {
        self.values[outer.index()][inner.index()]
    }

    pub fn error(&self, outer: Sign, inner: Sign) -> f64 {
        self.errors[outer.index()][inner.index()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeIntegrals {
    pub mode: usize,
    pub plus: PhaseIntegral,
    pub minus: PhaseIntegral,
}

impl ModeIntegrals {
    pub fn get(&self, sign: Sign) -> &PhaseIntegral {
        match sign {
            Sign::Plus => &self.plus,
            Sign::Minus => &self.minus,
        }
    }
}

/// M-integrals of one mode tagged with the setup they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeMIntegrals {
    pub mode: usize,
    pub duration: f64,
    pub values: MIntegrals,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseIntegralTable {
    pub duration: f64,
    pub modes: Vec<ModeIntegrals>,
    /// Optional cumulative grid (τ, I+(τ), I-(τ)) per mode.
    pub grid: Option<Vec<Vec<(f64, Complex64, Complex64)>>>,
}

impl PhaseIntegralTable {
    pub fn mode(&self, j: usize) -> Option<&ModeIntegrals> {
        self.modes.iter().find(|m| m.mode == j)
    }

    /// CSV with columns `j,sign,T,re,im,err,evals`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "j,sign,T,re,im,err,evals")?;
        for m in &self.modes {
            for s in Sign::BOTH {
                let p = m.get(s);
                writeln!(
                    w,
                    "{},{},{},{:.17e},{:.17e},{:.3e},{}",
                    m.mode,
                    s.symbol(),
                    self.duration,
                    p.value.re,
                    p.value.im,
                    p.abs_error,
                    p.evaluations
                )?;
            }
        }
        Ok(())
    }
}

/// exp(i[sΩτ + ω_j t(τ)]) sin(k_j x(τ)).
pub fn integrand(
    seg: &TrajectorySegment,
    cfg: &CavityConfig,
    j: usize,
    sign: Sign,
    tau: f64,
) -> Result<Complex64> {
    let k = cfg.wavenumber(j)?;
    let ev = seg.position(tau)?;
    cfg.ensure_inside(ev.x, tau)?;
    let phase = sign.value() * cfg.omega_gap * tau + k * ev.t;
    Ok(Complex64::from_polar((k * ev.x).sin(), phase))
}

fn check_end(seg: &TrajectorySegment, end: f64) -> Result<()> {
    if !(0.0..=seg.duration).contains(&end) {
        return Err(Error::Domain(format!(
            "integration time {end} outside segment [0, {}]",
            seg.duration
        )));
    }
    Ok(())
}

/// I_{s,j}(T) with an absolute error estimate.
pub fn phase_integral(
    seg: &TrajectorySegment,
    cfg: &CavityConfig,
    j: usize,
    sign: Sign,
    end: f64,
    opts: &QuadratureOptions,
) -> Result<PhaseIntegral> {
    check_end(seg, end)?;
    let out = sweep(
        SweepRequest {
            segment: seg,
            cavity: cfg,
            mode: j,
            signs: &[sign],
            with_m: false,
            record_panels: false,
        },
        end,
        &[],
        opts,
    )?;
    Ok(PhaseIntegral {
        value: out.last.integrals[sign.index()],
        abs_error: out.last.errors[sign.index()],
        evaluations: out.evaluations,
    })
}

/// M_{j,outer,inner}(T) = ∫₀ᵀ I_inner(τ) (d/dτ) I_outer(τ)* dτ.
pub fn m_integral(
    seg: &TrajectorySegment,
    cfg: &CavityConfig,
    j: usize,
    outer: Sign,
    inner: Sign,
    end: f64,
    opts: &QuadratureOptions,
) -> Result<PhaseIntegral> {
    check_end(seg, end)?;
    let signs = if outer == inner { vec![outer] } else { vec![outer, inner] };
    let out = sweep(
        SweepRequest {
            segment: seg,
            cavity: cfg,
            mode: j,
            signs: &signs,
            with_m: true,
            record_panels: false,
        },
        end,
        &[],
        opts,
    )?;
    Ok(PhaseIntegral {
        value: out.last.m[outer.index()][inner.index()],
        abs_error: out.last.m_errors[outer.index()][inner.index()],
        evaluations: out.evaluations,
    })
}

/// Both I± of one mode and, optionally, its four M-integrals.
pub fn mode_integrals(
    seg: &TrajectorySegment,
    cfg: &CavityConfig,
    j: usize,
    end: f64,
    with_m: bool,
    opts: &QuadratureOptions,
) -> Result<(ModeIntegrals, Option<ModeMIntegrals>)> {
    check_end(seg, end)?;
    let out = sweep(
        SweepRequest {
            segment: seg,
            cavity: cfg,
            mode: j,
            signs: &Sign::BOTH,
            with_m,
            record_panels: false,
        },
        end,
        &[],
        opts,
    )?;
    let mk = |s: Sign| PhaseIntegral {
        value: out.last.integrals[s.index()],
        abs_error: out.last.errors[s.index()],
        evaluations: out.evaluations,
    };
    let integrals = ModeIntegrals {
        mode: j,
        plus: mk(Sign::Plus),
        minus: mk(Sign::Minus),
    };
    let m = with_m.then(|| ModeMIntegrals {
        mode: j,
        duration: end,
        values: MIntegrals::new(out.last.m, out.last.m_errors),
    });
    Ok((integrals, m))
}

/// Integrals for every mode of the cavity; modes are evaluated in parallel.
pub fn integral_table(
    seg: &TrajectorySegment,
    cfg: &CavityConfig,
    end: f64,
    with_m: bool,
    opts: &QuadratureOptions,
) -> Result<(PhaseIntegralTable, Vec<ModeMIntegrals>)> {
    cfg.validate()?;
    let per_mode: Vec<_> = (1..=cfg.n_modes)
        .into_par_iter()
        .map(|j| mode_integrals(seg, cfg, j, end, with_m, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut modes = Vec::with_capacity(per_mode.len());
    let mut ms = Vec::new();
    for (i, m) in per_mode {
        modes.push(i);
        ms.extend(m);
    }
    Ok((
        PhaseIntegralTable {
            duration: end,
            modes,
            grid: None,
        },
        ms,
    ))
}

/// I±(τ) of one mode at each of the sorted `times`, from a single sweep.
pub fn cumulative_integrals(
    seg: &TrajectorySegment,
    cfg: &CavityConfig,
    j: usize,
    times: &[f64],
    opts: &QuadratureOptions,
) -> Result<Vec<Checkpoint>> {
    let end = times.last().copied().unwrap_or(0.0);
    check_end(seg, end)?;
    let out = sweep(
        SweepRequest {
            segment: seg,
            cavity: cfg,
            mode: j,
            signs: &Sign::BOTH,
            with_m: false,
            record_panels: false,
        },
        end,
        times,
        opts,
    )?;
    Ok(out.checkpoints)
}
