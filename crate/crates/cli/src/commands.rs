use std::io::Write;

use accelgates::oracle::{self, FieldInit, TruncatedFieldSpec};
use accelgates::oscillatory::{self, Sign};
use accelgates::perturbation::QubitState;
use accelgates::rotation::{self, ScanTable};
use accelgates::synthesis;
use accelgates::{Error, QuadratureOptions, UnitSystem};
use anyhow::Context;
use nalgebra::Vector3;
use serde_json::json;

use crate::config::{RunConfig, ScanParameter};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Errors carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn config(e: impl Into<anyhow::Error>) -> Self {
        Self { code: 1, error: e.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidConfig(_) | Error::Domain(_) | Error::OutOfCavity { .. } => 1,
            Error::Accuracy { .. } | Error::Convergence(_) | Error::Consistency(_) => 2,
            Error::Planning(_) => 3,
        };
        Self { code, error: e.into() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self { code: 1, error: e.into() }
    }
}

pub type CmdResult = Result<(), Failure>;

fn header(out: &mut dyn Write, cfg: &RunConfig) -> std::io::Result<()> {
    writeln!(out, "# accelgates {VERSION}")?;
    writeln!(out, "# config: {}", cfg.to_json())
}

fn quadrature(cfg: &RunConfig) -> QuadratureOptions {
    cfg.tolerances
}

pub fn integrals(cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let seg = cfg.trajectory.segment()?;
    let end = cfg.trajectory.duration;
    let (table, ms) = oscillatory::integral_table(&seg, &cfg.cavity, end, cfg.integrals.with_m, &quadrature(cfg))?;
    header(out, cfg)?;
    table.write_csv(&mut *out)?;
    for m in &ms {
        for outer in Sign::BOTH {
            for inner in Sign::BOTH {
                let v = m.values.get(outer, inner);
                writeln!(
                    out,
                    "{},{}{},{},{:.17e},{:.17e},{:.3e},",
                    m.mode,
                    outer.symbol(),
                    inner.symbol(),
                    m.duration,
                    v.re,
                    v.im,
                    m.values.error(outer, inner)
                )?;
            }
        }
    }
    Ok(())
}

pub fn scan(cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let spec = cfg
        .scan
        .as_ref()
        .ok_or_else(|| Failure::config(anyhow::anyhow!("config has no `scan` section")))?;
    let prep = cfg
        .field
        .coherent()
        .ok_or_else(|| Failure::config(anyhow::anyhow!("scans need a coherent field")))?;
    let opts = quadrature(cfg);
    let table: ScanTable = match spec.parameter {
        ScanParameter::Acceleration => {
            rotation::azimuth_scan(&cfg.cavity, &prep, cfg.trajectory.duration, &spec.values, spec.launch, &opts)?
        }
        ScanParameter::Duration => {
            let longest = spec.values.iter().copied().fold(cfg.trajectory.duration, f64::max);
            let seg = cfg.trajectory.segment()?.with_duration(longest);
            rotation::axis_vs_time(&cfg.cavity, &prep, &seg, &spec.values, &opts)?
        }
    };
    header(out, cfg)?;
    table.write_csv(&mut *out)?;
    Ok(())
}

pub fn synthesize(cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let s = cfg
        .synthesis
        .as_ref()
        .ok_or_else(|| Failure::config(anyhow::anyhow!("config has no `synthesis` section")))?;
    let target = s.target.rotation()?;
    let plan = synthesis::synthesize(&target, &s.template, &s.constraints, &s.grid, s.tol_fidelity, &quadrature(cfg))?;
    let doc = json!({
        "version": VERSION,
        "config": cfg,
        "plan": plan.to_json(),
    });
    writeln!(out, "{}", serde_json::to_string_pretty(&doc).context("serializing plan").map_err(Failure::config)?)?;
    if !plan.success {
        return Err(Failure {
            code: 3,
            error: anyhow::anyhow!(
                "best-effort plan reaches fidelity {:.6}, below 1 - {}",
                plan.fidelity,
                s.tol_fidelity
            ),
        });
    }
    Ok(())
}

pub fn oracle_verify(cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let seg = cfg.trajectory.segment()?;
    let end = cfg.trajectory.duration;
    let o = &cfg.oracle;
    let rho0 = QubitState::from_bloch(&Vector3::from(o.bloch))?;
    let field = match cfg.field.coherent() {
        Some(p) => TruncatedFieldSpec::coherent(cfg.cavity.n_modes, p, o.n_max),
        None => TruncatedFieldSpec::vacuum(cfg.cavity.n_modes, o.n_max),
    };
    let opts = quadrature(cfg);
    let mut checks = Vec::new();
    let mut all_pass = true;

    let idle = oracle::exact_evolve(&seg, &cfg.cavity.with_coupling(0.0), &field, &rho0, end, &o.solver)?;
    let pass = idle.state == rho0;
    all_pass &= pass;
    checks.push(json!({"check": "zero_coupling", "pass": pass}));

    match field.initial {
        // both sides vanish identically without coupling
        _ if cfg.cavity.coupling == 0.0 => {}
        FieldInit::Coherent(_) => {
            let r = oracle::coherent_halving(&seg, &cfg.cavity, &field, &rho0, end, &opts, &o.solver)?;
            let in_window = (o.coherent_window[0]..=o.coherent_window[1]).contains(&r.ratio);
            let small = r.residuals[0] <= o.coherent_max_residual;
            all_pass &= in_window && small;
            checks.push(json!({
                "check": "coherent_first_order_halving",
                "report": r,
                "window": o.coherent_window,
                "max_residual": o.coherent_max_residual,
                "pass": in_window && small,
            }));
        }
        FieldInit::Vacuum => {
            let r = oracle::vacuum_halving(&seg, &cfg.cavity, &field, &rho0, end, &opts, &o.solver)?;
            let pass = (o.vacuum_window[0]..=o.vacuum_window[1]).contains(&r.ratio);
            all_pass &= pass;
            checks.push(json!({
                "check": "vacuum_second_order_halving",
                "report": r,
                "window": o.vacuum_window,
                "pass": pass,
            }));
        }
    }

    if !o.ladder.is_empty() {
        let rep = oracle::convergence_check(&seg, &cfg.cavity, &field.initial, &rho0, end, &o.ladder, &o.solver)?;
        all_pass &= rep.converged;
        checks.push(json!({"check": "cutoff_ladder", "pass": rep.converged, "report": rep}));
    }

    let doc = json!({
        "version": VERSION,
        "config": cfg,
        "checks": checks,
        "pass": all_pass,
    });
    writeln!(out, "{}", serde_json::to_string_pretty(&doc).map_err(Failure::config)?)?;
    if all_pass {
        Ok(())
    } else {
        Err(Failure {
            code: 2,
            error: anyhow::anyhow!("oracle verification failed"),
        })
    }
}

pub fn units(omega_si: f64, a_natural: f64, out: &mut dyn Write) -> CmdResult {
    let units = UnitSystem::new(omega_si)?;
    let si = accelgates::worldline::natural_to_si_acceleration(a_natural, units);
    writeln!(out, "omega_si_rad_per_s = {omega_si:e}")?;
    writeln!(out, "a_natural = {a_natural}")?;
    writeln!(out, "a_si_m_per_s2 = {:e}", si.meters_per_second2)?;
    writeln!(out, "a_in_g = {:e}", si.in_g)?;
    Ok(())
}
