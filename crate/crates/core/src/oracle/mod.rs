//! Exact evolution of the qubit and a truncated multimode Fock space.
//!
//! In the interaction picture
//!
//! ```text
//! H(τ) = λ (σ⁺e^{iΩτ} + σ⁻e^{-iΩτ}) Σ_j sin(k_j x(τ)) (a_j† e^{iω_j t(τ)} + a_j e^{-iω_j t(τ)})
//! ```
//!
//! with σ± = σ_x ± iσ_y. The state vector is integrated with an adaptive
//! Runge-Kutta scheme and the field is traced out at the end.

pub mod dopri;

use nalgebra::Vector3;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;

use crate::cavity::CavityConfig;
use crate::error::{Error, Result};
use crate::oscillatory::{self, QuadratureOptions};
use crate::perturbation::{self, BlochVector, CoherentPrep, Operator2, QubitState};
use crate::worldline::TrajectorySegment;
use dopri::{StepControl, StepStats};

/// Probability mass a truncated coherent state must retain.
pub const COHERENT_MASS: f64 = 1.0 - 1e-12;
/// Extra Fock levels kept above the coherent mass cutoff.
pub const GUARD_LEVELS: usize = 2;
/// Largest tolerated drift of the state norm.
pub const NORM_DRIFT_LIMIT: f64 = 1e-9;
/// Ladder rungs agree when their Bloch vectors differ by less than this.
pub const LADDER_THRESHOLD: f64 = 1e-6;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldInit {
    Vacuum,
    Coherent(CoherentPrep),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedFieldSpec {
    /// Highest Fock level kept in each mode; mode j is `n_max[j - 1]`.
    pub n_max: Vec<usize>,
    pub initial: FieldInit,
}

/// Smallest n with Σ_{m ≤ n} e^{-|α|²}|α|^{2m}/m! ≥ 1 - 10⁻¹².
pub fn coherent_mass_cutoff(alpha: f64) -> usize {
    let mean = alpha * alpha;
    let mut term = (-mean).exp();
    let mut total = term;
    let mut n = 0;
    while total < COHERENT_MASS && n < 10_000 {
        n += 1;
        term *= mean / n as f64;
        total += term;
    }
    n
}

impl TruncatedFieldSpec {
    pub fn vacuum(n_modes: usize, n_max: usize) -> Self {
        Self {
            n_max: vec![n_max; n_modes],
            initial: FieldInit::Vacuum,
        }
    }

    /// Coherent state in `prep.mode`, cut by the mass rule plus guard
    /// levels; the other modes keep `n_max_others` levels.
    pub fn coherent(n_modes: usize, prep: CoherentPrep, n_max_others: usize) -> Self {
        let mut n_max = vec![n_max_others; n_modes];
        if (1..=n_modes).contains(&prep.mode) {
            n_max[prep.mode - 1] = coherent_mass_cutoff(prep.alpha.norm()) + GUARD_LEVELS;
        }
        Self {
            n_max,
            initial: FieldInit::Coherent(prep),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n_max.len()
    }

    pub fn validate(&self, cfg: &CavityConfig) -> Result<()> {
        if self.n_max.is_empty() || self.n_max.contains(&0) {
            return Err(Error::InvalidConfig("every mode needs n_max >= 1".into()));
        }
        if self.n_modes() > cfg.n_modes {
            return Err(Error::InvalidConfig(format!(
                "field has {} modes, cavity only {}",
                self.n_modes(),
                cfg.n_modes
            )));
        }
        if let FieldInit::Coherent(p) = &self.initial {
            p.validate(&cfg.with_modes(self.n_modes()))?;
            let needed = coherent_mass_cutoff(p.alpha.norm());
            if self.n_max[p.mode - 1] < needed {
                return Err(Error::InvalidConfig(format!(
                    "mode {} cutoff {} below the coherent mass cutoff {needed}",
                    p.mode,
                    self.n_max[p.mode - 1]
                )));
            }
        }
        let dim = self.field_dimension();
        if dim > 1 << 22 {
            return Err(Error::InvalidConfig(format!("field dimension {dim} is beyond desk scale")));
        }
        Ok(())
    }

    pub fn field_dimension(&self) -> usize {
        self.n_max.iter().map(|n| n + 1).product()
    }

    /// Field amplitudes and the norm of the truncated state before it is
    /// renormalised.
    fn initial_field(&self) -> (Vec<Complex64>, f64) {
        let dim = self.field_dimension();
        let mut v = vec![ZERO; dim];
        match self.initial {
            FieldInit::Vacuum => {
                v[0] = Complex64::new(1.0, 0.0);
                (v, 1.0)
            }
            FieldInit::Coherent(p) => {
                let stride = self.strides()[p.mode - 1];
                let a = p.alpha;
                let mut c = Complex64::new((-0.5 * a.norm_sqr()).exp(), 0.0);
                let mut mass = 0.0;
                for n in 0..=self.n_max[p.mode - 1] {
                    if n > 0 {
                        c *= a / (n as f64).sqrt();
                    }
                    v[n * stride] = c;
                    mass += c.norm_sqr();
                }
                let norm = mass.sqrt();
                for z in v.iter_mut() {
                    *z /= norm;
                }
                (v, norm)
            }
        }
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.n_modes()];
        for j in 1..self.n_modes() {
            s[j] = s[j - 1] * (self.n_max[j - 1] + 1);
        }
        s
    }
}

/// Per-run record of the integration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleDiagnostics {
    pub dimension: usize,
    pub n_max: Vec<usize>,
    pub runs: usize,
    pub steps: usize,
    pub rejected: usize,
    pub min_step: f64,
    pub max_step: f64,
    pub norm_drift: f64,
    /// Norm of the truncated coherent state before renormalisation.
    pub truncated_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub state: QubitState,
    pub delta_b: BlochVector,
    pub diagnostics: OracleDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleOptions {
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            max_steps: 5_000_000,
        }
    }
}

struct Propagator<'a> {
    seg: &'a TrajectorySegment,
    coupling: f64,
    omega_gap: f64,
    k: Vec<f64>,
    strides: Vec<usize>,
    n_max: Vec<usize>,
    /// digits[idx * n_modes + j] is the occupation of mode j in field state idx.
    digits: Vec<u16>,
    sqrt: Vec<f64>,
    field_dim: usize,
}

impl<'a> Propagator<'a> {
    fn new(seg: &'a TrajectorySegment, cfg: &CavityConfig, field: &TruncatedFieldSpec) -> Result<Self> {
        let n_modes = field.n_modes();
        let k = (1..=n_modes).map(|j| cfg.wavenumber(j)).collect::<Result<Vec<_>>>()?;
        let field_dim = field.field_dimension();
        let strides = field.strides();
        let mut digits = vec![0u16; field_dim * n_modes];
        for idx in 0..field_dim {
            let mut rest = idx;
            for j in 0..n_modes {
                digits[idx * n_modes + j] = (rest % (field.n_max[j] + 1)) as u16;
                rest /= field.n_max[j] + 1;
            }
        }
        let top = field.n_max.iter().copied().max().unwrap_or(0);
        Ok(Self {
            seg,
            coupling: cfg.coupling,
            omega_gap: cfg.omega_gap,
            k,
            strides,
            n_max: field.n_max.clone(),
            digits,
            sqrt: (0..=top + 1).map(|n| (n as f64).sqrt()).collect(),
            field_dim,
        })
    }

    /// Bound on ‖H‖: λ ‖μ‖ Σ_j ‖a_j + a_j†‖ ≤ 4λ Σ_j √n_max.
    fn norm_bound(&self) -> f64 {
        4.0 * self.coupling * self.n_max.iter().map(|&n| (n as f64).sqrt()).sum::<f64>()
    }

    fn phase_rate(&self, tau: f64) -> f64 {
        let u = self.seg.proper_acceleration() * tau;
        let k_max = self.k.last().copied().unwrap_or(0.0);
        self.omega_gap + k_max * (u.cosh() + u.sinh().abs())
    }

    fn step_cap(&self, tau: f64) -> f64 {
        // the rate grows with τ, so probe a little ahead
        let rate = self.phase_rate(tau).max(self.phase_rate(tau + FRAC_PI_4 / self.phase_rate(tau)));
        let by_phase = FRAC_PI_4 / rate;
        let norm = self.norm_bound();
        if norm > 0.0 {
            by_phase.min(0.5 / norm)
        } else {
            by_phase
        }
    }

    /// dψ/dτ = -i H(τ) ψ, with ψ laid out as [excited block | ground block].
    fn rhs(&self, tau: f64, psi: &[Complex64], out: &mut [Complex64]) {
        let ev = self.seg.event_unchecked(tau);
        let n_modes = self.k.len();
        let mut up = Vec::with_capacity(n_modes);
        let mut down = Vec::with_capacity(n_modes);
        for &k in &self.k {
            let envelope = (k * ev.x).sin();
            let phase = Complex64::from_polar(envelope, k * ev.t);
            up.push(phase);
            down.push(phase.conj());
        }
        let d = self.field_dim;
        let (excited, ground) = psi.split_at(d);
        let (out_e, out_g) = out.split_at_mut(d);
        // μ|g⟩ = 2e^{iΩτ}|e⟩, μ|e⟩ = 2e^{-iΩτ}|g⟩
        let qubit = Complex64::from_polar(2.0 * self.coupling, self.omega_gap * tau);
        let to_e = Complex64::new(0.0, -1.0) * qubit;
        let to_g = Complex64::new(0.0, -1.0) * qubit.conj();
        for idx in 0..d {
            let occ = &self.digits[idx * n_modes..(idx + 1) * n_modes];
            let mut fe = ZERO;
            let mut fg = ZERO;
            for j in 0..n_modes {
                let n = occ[j] as usize;
                let s = self.strides[j];
                if n > 0 {
                    // a† raises from n - 1
                    let c = up[j] * self.sqrt[n];
                    fe += c * ground[idx - s];
                    fg += c * excited[idx - s];
                }
                if n < self.n_max[j] {
                    let c = down[j] * self.sqrt[n + 1];
                    fe += c * ground[idx + s];
                    fg += c * excited[idx + s];
                }
            }
            out_e[idx] = to_e * fe;
            out_g[idx] = to_g * fg;
        }
    }
}

fn reduced(psi: &[Complex64], d: usize) -> Operator2 {
    let (e, g) = psi.split_at(d);
    let mut ee = 0.0;
    let mut gg = 0.0;
    let mut eg = ZERO;
    for i in 0..d {
        ee += e[i].norm_sqr();
        gg += g[i].norm_sqr();
        eg += e[i] * g[i].conj();
    }
    Operator2::new(Complex64::new(ee, 0.0), eg, eg.conj(), Complex64::new(gg, 0.0))
}

/// Evolves the qubit and truncated field over `[0, end]` and returns the
/// reduced qubit state.
pub fn exact_evolve(
    seg: &TrajectorySegment,
    cfg: &CavityConfig,
    field: &TruncatedFieldSpec,
    rho0: &QubitState,
    end: f64,
    opts: &OracleOptions,
) -> Result<OracleResult> {
    cfg.validate()?;
    field.validate(cfg)?;
    rho0.check(1e-10)?;
    if !(0.0..=seg.duration).contains(&end) {
        return Err(Error::Domain(format!("evolution end {end} outside segment [0, {}]", seg.duration)));
    }
    cfg.ensure_inside(seg.event_unchecked(0.0).x, 0.0)?;
    cfg.ensure_inside(seg.event_unchecked(end).x, end)?;

    let (field0, truncated_norm) = field.initial_field();
    let prop = Propagator::new(seg, cfg, field)?;
    let d = prop.field_dim;
    let mut diagnostics = OracleDiagnostics {
        dimension: 2 * d,
        n_max: field.n_max.clone(),
        runs: 0,
        steps: 0,
        rejected: 0,
        min_step: f64::INFINITY,
        max_step: 0.0,
        norm_drift: 0.0,
        truncated_norm,
    };
    if cfg.coupling == 0.0 || end == 0.0 {
        diagnostics.min_step = 0.0;
        return Ok(OracleResult {
            state: *rho0,
            delta_b: Vector3::zeros(),
            diagnostics,
        });
    }

    let ctl = StepControl {
        rtol: opts.tol,
        atol: opts.tol,
        max_steps: opts.max_steps,
    };
    let mut change = Operator2::zeros();
    for (weight, amps) in rho0.pure_decomposition() {
        if weight == 0.0 {
            continue;
        }
        let mut psi = vec![ZERO; 2 * d];
        for i in 0..d {
            psi[i] = amps[0] * field0[i];
            psi[d + i] = amps[1] * field0[i];
        }
        let before = reduced(&psi, d);
        let norm0: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let stats: StepStats = dopri::integrate(
            |t, y, dy| prop.rhs(t, y, dy),
            |t| prop.step_cap(t),
            &mut psi,
            0.0,
            end,
            &ctl,
        )?;
        let norm1: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        diagnostics.runs += 1;
        diagnostics.steps += stats.accepted;
        diagnostics.rejected += stats.rejected;
        diagnostics.min_step = diagnostics.min_step.min(stats.min_step);
        diagnostics.max_step = diagnostics.max_step.max(stats.max_step);
        diagnostics.norm_drift = diagnostics.norm_drift.max((norm1 - norm0).abs());
        change += (reduced(&psi, d) - before) * Complex64::new(weight, 0.0);
    }
    if diagnostics.norm_drift > NORM_DRIFT_LIMIT {
        return Err(Error::Convergence(format!(
            "state norm drifted by {:e} (limit {NORM_DRIFT_LIMIT:e})",
            diagnostics.norm_drift
        )));
    }
    // adding only the change keeps ρ₀ exact when nothing happens
    let (_, comps) = perturbation::pauli::components(&change);
    let delta_b = Vector3::new(comps.x.re, comps.y.re, comps.z.re);
    let state = QubitState::from_bloch(&(rho0.bloch() + delta_b)).map_err(|e| {
        Error::Convergence(format!("reduced state left the Bloch ball: {e}"))
    })?;
    Ok(OracleResult {
        state,
        delta_b,
        diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LadderRung {
    pub n_modes: usize,
    pub n_max: usize,
    pub bloch: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub rungs: Vec<LadderRung>,
    /// Bloch-vector change between consecutive rungs.
    pub differences: Vec<f64>,
    pub monotone: bool,
    pub converged: bool,
}

impl ConvergenceReport {
    pub fn into_result(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::Convergence(format!(
                "cutoff ladder did not settle below {LADDER_THRESHOLD:e}: differences {:?}{}",
                self.differences,
                if self.monotone { "" } else { " (non-monotone)" }
            )))
        }
    }
}

/// Re-runs the evolution on a ladder of (n_modes, n_max) truncations. For a
/// coherent field the populated mode keeps its mass-rule cutoff and n_max
/// applies to the other modes.
pub fn convergence_check(
    seg: &TrajectorySegment,
    cfg: &CavityConfig,
    initial: &FieldInit,
    rho0: &QubitState,
    end: f64,
    ladder: &[(usize, usize)],
    opts: &OracleOptions,
) -> Result<ConvergenceReport> {
    if ladder.len() < 2 {
        return Err(Error::InvalidConfig("a cutoff ladder needs at least two rungs".into()));
    }
    let rungs = ladder
        .par_iter()
        .map(|&(n_modes, n_max)| {
            let field = match initial {
                FieldInit::Vacuum => TruncatedFieldSpec::vacuum(n_modes, n_max),
                FieldInit::Coherent(p) => TruncatedFieldSpec::coherent(n_modes, *p, n_max),
            };
            let wide = cfg.with_modes(cfg.n_modes.max(n_modes));
            let r = exact_evolve(seg, &wide, &field, rho0, end, opts)?;
            let b = r.state.bloch();
            Ok(LadderRung {
                n_modes,
                n_max,
                bloch: [b.x, b.y, b.z],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let differences: Vec<f64> = rungs
        .windows(2)
        .map(|w| {
            let a = Vector3::from(w[0].bloch);
            let b = Vector3::from(w[1].bloch);
            (a - b).norm()
        })
        .collect();
    let monotone = differences.windows(2).all(|w| w[1] <= w[0] || w[1] < LADDER_THRESHOLD);
    let converged = differences.last().is_some_and(|&d| d < LADDER_THRESHOLD);
    Ok(ConvergenceReport {
        rungs,
        differences,
        monotone,
        converged,
    })
}

/// Residuals of a perturbative prediction at λ and λ/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalvingReport {
    pub couplings: [f64; 2],
    pub residuals: [f64; 2],
    /// residuals[0] / residuals[1].
    pub ratio: f64,
    pub exact_norms: [f64; 2],
}

impl HalvingReport {
    fn new(couplings: [f64; 2], residuals: [f64; 2], exact_norms: [f64; 2]) -> Self {
        Self {
            couplings,
            residuals,
            ratio: residuals[0] / residuals[1],
            exact_norms,
        }
    }
}

/// Coherent first order against the oracle at λ and λ/2; residuals are
/// relative to ‖Δb_exact‖.
pub fn coherent_halving(
    seg: &TrajectorySegment,
    cfg: &CavityConfig,
    field: &TruncatedFieldSpec,
    rho0: &QubitState,
    end: f64,
    quad: &QuadratureOptions,
    opts: &OracleOptions,
) -> Result<HalvingReport> {
    let prep = match field.initial {
        FieldInit::Coherent(p) => p,
        FieldInit::Vacuum => return Err(Error::InvalidConfig("coherent halving needs a coherent field".into())),
    };
    let (ints, _) = oscillatory::mode_integrals(seg, cfg, prep.mode, end, false, quad)?;
    let lambdas = [cfg.coupling, 0.5 * cfg.coupling];
    let runs = lambdas
        .par_iter()
        .map(|&l| {
            let c = cfg.with_coupling(l);
            let exact = exact_evolve(seg, &c, field, rho0, end, opts)?;
            let pert = perturbation::coherent_first_order(ints.plus.value, ints.minus.value, &prep, l, rho0);
            let norm = exact.delta_b.norm();
            Ok(((pert.delta_b - exact.delta_b).norm() / norm, norm))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HalvingReport::new(lambdas, [runs[0].0, runs[1].0], [runs[0].1, runs[1].1]))
}

/// Vacuum second order against the oracle at λ and λ/2; residuals are
/// absolute.
pub fn vacuum_halving(
    seg: &TrajectorySegment,
    cfg: &CavityConfig,
    field: &TruncatedFieldSpec,
    rho0: &QubitState,
    end: f64,
    quad: &QuadratureOptions,
    opts: &OracleOptions,
) -> Result<HalvingReport> {
    if field.initial != FieldInit::Vacuum {
        return Err(Error::InvalidConfig("vacuum halving needs a vacuum field".into()));
    }
    let modes = cfg.with_modes(field.n_modes());
    let (table, ms) = oscillatory::integral_table(seg, &modes, end, true, quad)?;
    let coeffs = perturbation::vacuum_coefficients(&table, &ms)?;
    let lambdas = [cfg.coupling, 0.5 * cfg.coupling];
    let b0 = rho0.bloch();
    let runs = lambdas
        .par_iter()
        .map(|&l| {
            let exact = exact_evolve(seg, &modes.with_coupling(l), field, rho0, end, opts)?;
            let pert = perturbation::vacuum_bloch_delta(&coeffs, &b0, l);
            Ok(((pert - exact.delta_b).norm(), exact.delta_b.norm()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HalvingReport::new(lambdas, [runs[0].0, runs[1].0], [runs[0].1, runs[1].1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cavity(n: usize, coupling: f64) -> CavityConfig {
        CavityConfig::new(PI, n, 1.0, coupling).unwrap()
    }

    #[test]
    fn cutoff_rule() {
        assert_eq!(coherent_mass_cutoff(0.0), 0);
        for alpha in [0.1, 0.5, 1.0, 2.0, 3.5] {
            let n = coherent_mass_cutoff(alpha);
            let spec = TruncatedFieldSpec::coherent(1, CoherentPrep::new(1, Complex64::new(alpha, 0.0)), 1);
            assert_eq!(spec.n_max[0], n + GUARD_LEVELS);
            let (_, norm) = spec.initial_field();
            assert!(norm * norm >= COHERENT_MASS, "α = {alpha}: {norm}");
        }
    }

    #[test]
    fn zero_coupling_is_exact() {
        let seg = TrajectorySegment::accelerated(0.5, 0.0, 2.0).unwrap();
        let rho0 = QubitState::from_bloch(&Vector3::new(0.3, 0.2, -0.4)).unwrap();
        let r = exact_evolve(&seg, &cavity(2, 0.0), &TruncatedFieldSpec::vacuum(2, 2), &rho0, 2.0, &OracleOptions::default()).unwrap();
        assert_eq!(r.state, rho0);
    }

    #[test]
    fn detector_on_a_node_does_not_evolve() {
        let seg = TrajectorySegment::inertial(0.0, 3.0).unwrap();
        let rho0 = QubitState::from_bloch(&Vector3::new(0.6, 0.0, 0.7)).unwrap();
        let field = TruncatedFieldSpec::coherent(2, CoherentPrep::new(1, Complex64::new(0.5, 0.5)), 2);
        let r = exact_evolve(&seg, &cavity(2, 0.1), &field, &rho0, 3.0, &OracleOptions::default()).unwrap();
        assert_eq!(r.delta_b, Vector3::zeros());
        assert_eq!(r.state, rho0);
    }

    #[test]
    fn resonant_excited_detector_decays() {
        let seg = TrajectorySegment::inertial(0.5 * PI, 5.0).unwrap();
        let rho0 = QubitState::excited();
        let r = exact_evolve(&seg, &cavity(1, 0.01), &TruncatedFieldSpec::vacuum(1, 3), &rho0, 5.0, &OracleOptions::default()).unwrap();
        assert!(r.diagnostics.norm_drift < NORM_DRIFT_LIMIT);
        r.state.check(1e-9).unwrap();
        assert!(r.delta_b.z < 0.0);
    }

    #[test]
    fn ladder_at_zero_coupling_is_flat() {
        let seg = TrajectorySegment::accelerated(1.0, 0.0, 1.5).unwrap();
        let rep = convergence_check(
            &seg,
            &cavity(3, 0.0),
            &FieldInit::Vacuum,
            &QubitState::ground(),
            1.5,
            &[(1, 1), (2, 2), (3, 3)],
            &OracleOptions::default(),
        )
        .unwrap();
        assert!(rep.differences.iter().all(|&d| d == 0.0));
        assert!(rep.converged);
    }

    #[test]
    fn invalid_fields_are_rejected() {
        let cfg = cavity(2, 0.01);
        assert!(TruncatedFieldSpec::vacuum(2, 0).validate(&cfg).is_err());
        assert!(TruncatedFieldSpec::vacuum(3, 1).validate(&cfg).is_err());
        let mut f = TruncatedFieldSpec::coherent(1, CoherentPrep::new(1, Complex64::new(2.0, 0.0)), 1);
        f.n_max[0] = 3;
        assert!(f.validate(&cfg).is_err());
    }
}
