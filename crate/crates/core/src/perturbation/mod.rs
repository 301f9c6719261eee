//! Perturbative evolution of the reduced qubit state.
//!
//! With the monopole moment μ(τ) = σ⁺e^{iΩτ} + σ⁻e^{-iΩτ} and σ± = σ_x ± iσ_y,
//! the first-order propagator is
//!
//! ```text
//! U⁽¹⁾ = -iλ Σ_j (σ⁺a_j† I₊ + σ⁻a_j I₊* + σ⁻a_j† I₋ + σ⁺a_j I₋*)
//! ```
//!
//! * Coherent state α in one mode: the leading order is the rotation
//!   ρ → ρ - iλ[n·σ, ρ] with n = (A + A*, i(A - A*), 0), A = α*I₊ + αI₋*.
//! * Vacuum: the first order traces out to zero; the second order is built
//!   from the per-mode coefficients in [`ModeVacuumCoefficients`].

pub mod state;

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cavity::CavityConfig;
use crate::error::{Error, Result};
use crate::oscillatory::{self, MIntegrals, ModeMIntegrals, PhaseIntegralTable, QuadratureOptions, Sign};
use crate::worldline::TrajectorySegment;

pub use state::{pauli, BlochVector, Operator2, QubitState};

/// Above this value of λ|α| the first-order treatment is flagged.
pub const COHERENT_VALIDITY_LIMIT: f64 = 0.05;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentPrep {
    /// 1-based mode index holding the coherent state.
    pub mode: usize,
    pub alpha: Complex64,
}

impl CoherentPrep {
    pub fn new(mode: usize, alpha: Complex64) -> Self {
        Self { mode, alpha }
    }

    pub fn from_polar(mode: usize, magnitude: f64, phase: f64) -> Self {
        Self::new(mode, Complex64::from_polar(magnitude, phase))
    }

    pub fn validate(&self, cfg: &CavityConfig) -> Result<()> {
        if self.mode == 0 || self.mode > cfg.n_modes {
            return Err(Error::InvalidConfig(format!(
                "coherent mode {} outside 1..={}",
                self.mode, cfg.n_modes
            )));
        }
        if !(self.alpha.re.is_finite() && self.alpha.im.is_finite()) {
            return Err(Error::InvalidConfig("coherent amplitude must be finite".into()));
        }
        Ok(())
    }

    /// True when λ|α| is too large for the first-order picture.
    pub fn exceeds_validity(&self, coupling: f64) -> bool {
        coupling * self.alpha.norm() > COHERENT_VALIDITY_LIMIT
    }

    /// A = α* I₊ + α I₋*.
    pub fn rotation_amplitude(&self, i_plus: Complex64, i_minus: Complex64) -> Complex64 {
        self.alpha.conj() * i_plus + self.alpha * i_minus.conj()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldPrep {
    Vacuum,
    Coherent(CoherentPrep),
}

/// Generator n of the first-order coherent rotation, n = (2 Re A, -2 Im A, 0).
pub fn rotation_generator(a: Complex64) -> Vector3<f64> {
    let n_y = (I * (a - a.conj())).re;
    Vector3::new(2.0 * a.re, n_y, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentEvolution {
    pub state: QubitState,
    pub delta_b: BlochVector,
    /// Set when λ|α| exceeds [`COHERENT_VALIDITY_LIMIT`].
    pub validity_warning: bool,
}

/// ρ_T = ρ₀ + (λ/i)[(A + A*)σ_x ρ₀ + i(A - A*)σ_y ρ₀ - H.c.], assembled on
/// Pauli components: Δb = 2λ n × b₀ with no identity part.
pub fn coherent_first_order(
    i_plus: Complex64,
    i_minus: Complex64,
    prep: &CoherentPrep,
    coupling: f64,
    rho0: &QubitState,
) -> CoherentEvolution {
    let validity_warning = prep.exceeds_validity(coupling);
    if validity_warning {
        log::warn!(
            "λ|α| = {:.3e} exceeds {COHERENT_VALIDITY_LIMIT}; first order may be inaccurate",
            coupling * prep.alpha.norm()
        );
    }
    let a = prep.rotation_amplitude(i_plus, i_minus);
    let n = rotation_generator(a);
    let b0 = rho0.bloch();
    let delta_b = 2.0 * coupling * n.cross(&b0);
    CoherentEvolution {
        state: QubitState::from_bloch_unchecked(&(b0 + delta_b)),
        delta_b,
        validity_warning,
    }
}

/// First-order reduced correction Tr_f(U⁽¹⁾ρ₀) + H.c. for a field whose only
/// relevant data are the mode expectation values ⟨a_j⟩.
pub fn first_order_reduced(
    table: &PhaseIntegralTable,
    mode_amplitudes: &[(usize, Complex64)],
    coupling: f64,
    rho0: &QubitState,
) -> Result<Operator2> {
    let mut generator = Operator2::zeros();
    for &(j, alpha) in mode_amplitudes {
        let m = table
            .mode(j)
            .ok_or_else(|| Error::Consistency(format!("no integrals for mode {j}")))?;
        let (ip, im) = (m.plus.value, m.minus.value);
        // ⟨a†⟩ = α*, ⟨a⟩ = α
        generator += (pauli::raising() * ip + pauli::lowering() * im) * alpha.conj();
        generator += (pauli::lowering() * ip.conj() + pauli::raising() * im.conj()) * alpha;
    }
    let rho = rho0.matrix();
    let term = generator * rho * Complex64::new(0.0, -coupling);
    Ok(term + term.adjoint())
}

/// Confirms that the first-order reduced correction vanishes for a vacuum
/// field. Refuses any other preparation.
pub fn vacuum_first_order_check(
    table: &PhaseIntegralTable,
    prep: &FieldPrep,
    coupling: f64,
    rho0: &QubitState,
) -> Result<Operator2> {
    if !matches!(prep, FieldPrep::Vacuum) {
        return Err(Error::Consistency(
            "first-order vanishing only holds for a vacuum field".into(),
        ));
    }
    // every U⁽¹⁾ term moves one photon, so ⟨0|a_j|0⟩ = 0 kills it
    let amplitudes: Vec<_> = table.modes.iter().map(|m| (m.mode, Complex64::new(0.0, 0.0))).collect();
    let correction = first_order_reduced(table, &amplitudes, coupling, rho0)?;
    if correction.iter().any(|z| z.norm() != 0.0) {
        return Err(Error::Consistency("vacuum first-order correction is nonzero".into()));
    }
    Ok(correction)
}

/// Second-order vacuum coefficients of one mode.
///
/// `c_one` and `c_z` come from Tr_f(U⁽²⁾ρ₀) = λ² Σ_j (C_𝟙 + C_z σ_z) ρ₀ with
/// C_𝟙 = -2(M₋₋ + M₊₊) and C_z = -2(M₋₋ - M₊₊). Their real parts are set
/// from Re M_ss = |I_s|²/2, which is exact and keeps the correction
/// traceless independently of the quadrature error in M.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeVacuumCoefficients {
    pub mode: usize,
    pub a_x: f64,
    pub a_y: f64,
    pub a_xy: Complex64,
    pub a_yx: Complex64,
    pub b_plus: f64,
    /// Purely imaginary.
    pub b_minus: Complex64,
    pub d_plus: f64,
    pub d_minus: f64,
    pub c_one: Complex64,
    pub c_z: Complex64,
}

impl ModeVacuumCoefficients {
    pub fn assemble(mode: usize, i_plus: Complex64, i_minus: Complex64, m: &MIntegrals) -> Self {
        let pp = i_plus.norm_sqr();
        let mm = i_minus.norm_sqr();
        let cross = i_plus * i_minus.conj(); // I₊ I₋*
        let a_x = pp + mm + 2.0 * cross.re;
        let a_y = pp + mm - 2.0 * cross.re;
        let a_xy = I * ((cross - cross.conj()) - pp + mm);
        let m_mm = Complex64::new(0.5 * mm, m.get(Sign::Minus, Sign::Minus).im);
        let m_pp = Complex64::new(0.5 * pp, m.get(Sign::Plus, Sign::Plus).im);
        Self {
            mode,
            a_x,
            a_y,
            a_xy,
            a_yx: a_xy.conj(),
            b_plus: 2.0 * cross.re,
            b_minus: cross - cross.conj(),
            d_plus: pp + mm,
            d_minus: pp - mm,
            c_one: -2.0 * (m_mm + m_pp),
            c_z: -2.0 * (m_mm - m_pp),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VacuumCoefficients {
    pub duration: f64,
    pub modes: Vec<ModeVacuumCoefficients>,
}

/// Assembles the vacuum coefficients from matching integral and M tables.
pub fn vacuum_coefficients(table: &PhaseIntegralTable, m_values: &[ModeMIntegrals]) -> Result<VacuumCoefficients> {
    if table.modes.len() != m_values.len() {
        return Err(Error::Consistency(format!(
            "{} integral modes but {} M entries",
            table.modes.len(),
            m_values.len()
        )));
    }
    let mut modes = Vec::with_capacity(table.modes.len());
    for mi in &table.modes {
        let m = m_values
            .iter()
            .find(|m| m.mode == mi.mode)
            .ok_or_else(|| Error::Consistency(format!("no M-integrals for mode {}", mi.mode)))?;
        if (m.duration - table.duration).abs() > 1e-12 * table.duration.max(1.0) {
            return Err(Error::Consistency(format!(
                "M-integrals of mode {} were computed for T = {}, table is for T = {}",
                mi.mode, m.duration, table.duration
            )));
        }
        modes.push(ModeVacuumCoefficients::assemble(
            mi.mode,
            mi.plus.value,
            mi.minus.value,
            &m.values,
        ));
    }
    Ok(VacuumCoefficients {
        duration: table.duration,
        modes,
    })
}

/// Second-order change of the Bloch vector in vacuum:
///
/// ```text
/// Δb_x = 2λ² Σ_j [(B₊ + Re C_𝟙) b_x + (iB₋ + Im C_z) b_y]
/// Δb_y = 2λ² Σ_j [(Re C_𝟙 - B₊) b_y + (iB₋ - Im C_z) b_x]
/// Δb_z = 2λ² Σ_j [(Re C_𝟙 - D₊) b_z + D₋ + Re C_z]
/// ```
pub fn vacuum_bloch_delta(coeffs: &VacuumCoefficients, b0: &BlochVector, coupling: f64) -> BlochVector {
    let mut sum = Vector3::zeros();
    for c in &coeffs.modes {
        let ib_minus = (I * c.b_minus).re;
        sum.x += (c.b_plus + c.c_one.re) * b0.x + (ib_minus + c.c_z.im) * b0.y;
        sum.y += (c.c_one.re - c.b_plus) * b0.y + (ib_minus - c.c_z.im) * b0.x;
        sum.z += (c.c_one.re - c.d_plus) * b0.z + c.d_minus + c.c_z.re;
    }
    sum * (2.0 * coupling * coupling)
}

/// ρ_T = ρ₀ + ½ Δb·σ, second order in vacuum.
pub fn vacuum_second_order(coeffs: &VacuumCoefficients, rho0: &QubitState, coupling: f64) -> QubitState {
    let b0 = rho0.bloch();
    let b = b0 + vacuum_bloch_delta(coeffs, &b0, coupling);
    QubitState::from_bloch_unchecked(&b)
}

/// Second-order vacuum correction by direct 2×2 operator algebra,
/// λ² Σ_j [K_j ρ₀ K_j† + C_j ρ₀ + ρ₀ C_j†] with K_j = I₊σ⁺ + I₋σ⁻ and
/// C_j = C_𝟙 + C_z σ_z. An independent route to [`vacuum_bloch_delta`].
pub fn vacuum_second_order_matrix(coeffs_source: &[(Complex64, Complex64, MIntegrals)], rho0: &QubitState, coupling: f64) -> Operator2 {
    let rho = rho0.matrix();
    let mut total = Operator2::zeros();
    for (ip, im, m) in coeffs_source {
        let k = pauli::raising() * *ip + pauli::lowering() * *im;
        let m_mm = Complex64::new(0.5 * im.norm_sqr(), m.get(Sign::Minus, Sign::Minus).im);
        let m_pp = Complex64::new(0.5 * ip.norm_sqr(), m.get(Sign::Plus, Sign::Plus).im);
        let c = pauli::identity() * (-2.0 * (m_mm + m_pp)) + pauli::z() * (-2.0 * (m_mm - m_pp));
        total += k * rho * k.adjoint() + c * rho + rho * c.adjoint();
    }
    total * Complex64::new(coupling * coupling, 0.0)
}

/// Mode-sum truncation policy for vacuum quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationPolicy {
    pub initial_modes: usize,
    pub max_modes: usize,
    /// Stop when doubling changes ‖Δb‖ by less than this relative amount.
    pub rel_tol: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            initial_modes: 8,
            max_modes: 256,
            rel_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedVacuumDelta {
    pub delta_b: BlochVector,
    pub n_modes: usize,
    pub converged: bool,
    /// (n_modes, ‖Δb‖) for every rung that was evaluated.
    pub history: Vec<(usize, f64)>,
}

/// Vacuum Δb with the mode sum grown in doublings until it settles.
pub fn vacuum_bloch_delta_converged(
    seg: &TrajectorySegment,
    cfg: &CavityConfig,
    end: f64,
    b0: &BlochVector,
    policy: &TruncationPolicy,
    opts: &QuadratureOptions,
) -> Result<TruncatedVacuumDelta> {
    if policy.initial_modes == 0 || policy.max_modes < policy.initial_modes {
        return Err(Error::InvalidConfig("truncation policy needs 1 <= initial_modes <= max_modes".into()));
    }
    let mut coeffs = VacuumCoefficients {
        duration: end,
        modes: Vec::new(),
    };
    let mut history = Vec::new();
    let mut n = policy.initial_modes;
    let mut previous: Option<f64> = None;
    loop {
        let wide = cfg.with_modes(n);
        let start = coeffs.modes.len() + 1;
        let fresh: Vec<_> = {
            use rayon::prelude::*;
            (start..=n)
                .into_par_iter()
                .map(|j| {
                    let (i, m) = oscillatory::mode_integrals(seg, &wide, j, end, true, opts)?;
                    let m = m.expect("requested M-integrals");
                    Ok(ModeVacuumCoefficients::assemble(j, i.plus.value, i.minus.value, &m.values))
                })
                .collect::<Result<Vec<_>>>()?
        };
        coeffs.modes.extend(fresh);
        let delta = vacuum_bloch_delta(&coeffs, b0, cfg.coupling);
        let norm = delta.norm();
        history.push((n, norm));
        let settled = previous.is_some_and(|p| (norm - p).abs() <= policy.rel_tol * norm.max(f64::MIN_POSITIVE));
        if settled || n >= policy.max_modes {
            if !settled {
                log::warn!("vacuum mode sum not settled at {n} modes (cap {})", policy.max_modes);
            }
            return Ok(TruncatedVacuumDelta {
                delta_b: delta,
                n_modes: n,
                converged: settled,
                history,
            });
        }
        previous = Some(norm);
        n = (2 * n).min(policy.max_modes);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oscillatory::{ModeIntegrals, PhaseIntegral};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pi(v: Complex64) -> PhaseIntegral {
        PhaseIntegral {
            value: v,
            abs_error: 0.0,
            evaluations: 0,
        }
    }

    fn table_of(entries: &[(Complex64, Complex64)], duration: f64) -> PhaseIntegralTable {
        PhaseIntegralTable {
            duration,
            modes: entries
                .iter()
                .enumerate()
                .map(|(k, (p, m))| ModeIntegrals {
                    mode: k + 1,
                    plus: pi(*p),
                    minus: pi(*m),
                })
                .collect(),
            grid: None,
        }
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_integrals_give_zero_coefficients() {
        let t = table_of(&[(c(0.0, 0.0), c(0.0, 0.0))], 1.0);
        let m = vec![ModeMIntegrals {
            mode: 1,
            duration: 1.0,
            values: MIntegrals::zero(),
        }];
        let co = vacuum_coefficients(&t, &m).unwrap();
        let k = co.modes[0];
        assert_eq!([k.a_x, k.a_y, k.b_plus, k.d_plus, k.d_minus], [0.0; 5]);
        assert_eq!(k.c_one.norm() + k.c_z.norm() + k.a_xy.norm(), 0.0);
        let db = vacuum_bloch_delta(&co, &Vector3::new(0.1, 0.2, 0.3), 0.5);
        assert_eq!(db, Vector3::zeros());
    }

    #[test]
    fn unit_real_integrals() {
        let k = ModeVacuumCoefficients::assemble(1, c(1.0, 0.0), c(1.0, 0.0), &MIntegrals::zero());
        assert_eq!(k.b_plus, 2.0);
        assert_eq!(k.b_minus, c(0.0, 0.0));
        assert_eq!(k.d_plus, 2.0);
        assert_eq!(k.d_minus, 0.0);
        assert_eq!(k.a_x, 4.0);
        assert_eq!(k.a_y, 0.0);
    }

    #[test]
    fn random_coefficients_match_direct_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let ip = c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let im = c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let k = ModeVacuumCoefficients::assemble(1, ip, im, &MIntegrals::zero());
            // direct re-evaluation of the defining expressions
            let b_plus = ip * im.conj() + ip.conj() * im;
            let b_minus = ip * im.conj() - ip.conj() * im;
            let a_x = ip.norm_sqr() + im.norm_sqr() + ip.conj() * im + ip * im.conj();
            let a_y = ip.norm_sqr() + im.norm_sqr() - ip.conj() * im - ip * im.conj();
            let a_xy = I * ((ip * im.conj() - ip.conj() * im) - ip.norm_sqr() + im.norm_sqr());
            assert!(b_plus.im.abs() < 1e-12 && (b_plus.re - k.b_plus).abs() < 1e-12);
            assert!(b_minus.re.abs() < 1e-12 && (b_minus - k.b_minus).norm() < 1e-12);
            assert!(k.b_minus.re.abs() < 1e-15);
            assert!((a_x.re - k.a_x).abs() < 1e-12 && (a_y.re - k.a_y).abs() < 1e-12);
            assert!((a_xy - k.a_xy).norm() < 1e-12);
            assert!((k.a_yx - k.a_xy.conj()).norm() < 1e-12);
            assert!(k.d_plus >= k.d_minus.abs());
        }
    }

    #[test]
    fn mismatched_mode_sets() {
        let t = table_of(&[(c(1.0, 0.0), c(1.0, 0.0)), (c(1.0, 0.0), c(0.0, 1.0))], 2.0);
        let one = vec![ModeMIntegrals {
            mode: 1,
            duration: 2.0,
            values: MIntegrals::zero(),
        }];
        assert!(matches!(vacuum_coefficients(&t, &one), Err(Error::Consistency(_))));
        let wrong = vec![
            ModeMIntegrals { mode: 1, duration: 2.0, values: MIntegrals::zero() },
            ModeMIntegrals { mode: 3, duration: 2.0, values: MIntegrals::zero() },
        ];
        assert!(matches!(vacuum_coefficients(&t, &wrong), Err(Error::Consistency(_))));
        let stale = vec![
            ModeMIntegrals { mode: 1, duration: 2.0, values: MIntegrals::zero() },
            ModeMIntegrals { mode: 2, duration: 1.0, values: MIntegrals::zero() },
        ];
        assert!(matches!(vacuum_coefficients(&t, &stale), Err(Error::Consistency(_))));
    }

    #[test]
    fn bloch_route_matches_matrix_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.gen_range(1..4);
            let mut src = Vec::new();
            let mut coeffs = VacuumCoefficients { duration: 1.0, modes: vec![] };
            for j in 0..n {
                let ip = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                let im = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                let mut vals = [[c(0.0, 0.0); 2]; 2];
                for row in vals.iter_mut() {
                    for v in row.iter_mut() {
                        *v = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                    }
                }
                let m = MIntegrals::new(vals, [[0.0; 2]; 2]);
                coeffs.modes.push(ModeVacuumCoefficients::assemble(j + 1, ip, im, &m));
                src.push((ip, im, m));
            }
            let dir = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let b0 = dir.normalize() * rng.gen_range(0.0..1.0);
            let rho0 = QubitState::from_bloch(&b0).unwrap();
            let lambda = rng.gen_range(0.0..0.3);
            let mat = vacuum_second_order_matrix(&src, &rho0, lambda);
            let (tr, comps) = pauli::components(&mat);
            assert!(tr.norm() < 1e-12, "trace {tr}");
            assert!(state::hermiticity_defect(&mat) < 1e-12);
            let db = vacuum_bloch_delta(&coeffs, &b0, lambda);
            for k in 0..3 {
                assert!(comps[k].im.abs() < 1e-12);
                assert_abs_diff_eq!(comps[k].re, db[k], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn vacuum_delta_scales_quadratically_and_vanishes_at_zero_coupling() {
        let k = ModeVacuumCoefficients::assemble(1, c(0.7, -0.2), c(1.3, 0.4), &MIntegrals::new([[c(0.1, 0.3); 2]; 2], [[0.0; 2]; 2]));
        let co = VacuumCoefficients { duration: 1.0, modes: vec![k] };
        let b0 = Vector3::new(0.2, -0.5, 0.4);
        assert_eq!(vacuum_bloch_delta(&co, &b0, 0.0), Vector3::zeros());
        let d1 = vacuum_bloch_delta(&co, &b0, 0.01);
        let d2 = vacuum_bloch_delta(&co, &b0, 0.02);
        assert!((d2 - d1 * 4.0).norm() < 1e-15);
    }

    #[test]
    fn coherent_first_order_trivial_cases() {
        let rho0 = QubitState::from_bloch(&Vector3::new(0.1, 0.5, -0.6)).unwrap();
        let ip = c(0.4, 1.2);
        let im = c(-2.0, 0.3);
        let zero_alpha = CoherentPrep::new(1, c(0.0, 0.0));
        let out = coherent_first_order(ip, im, &zero_alpha, 0.01, &rho0);
        assert!((out.state.matrix() - rho0.matrix()).norm() < 1e-15);
        let prep = CoherentPrep::from_polar(1, 1.0, 0.3);
        let out = coherent_first_order(ip, im, &prep, 0.0, &rho0);
        assert!((out.state.matrix() - rho0.matrix()).norm() < 1e-15);
    }

    #[test]
    fn coherent_first_order_matches_operator_form() {
        // (λ/i)[(A + A*)σ_x ρ₀ + i(A - A*)σ_y ρ₀ - H.c.] by matrix algebra
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let ip = c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let im = c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let prep = CoherentPrep::from_polar(1, rng.gen_range(0.0..2.0), rng.gen_range(-3.0..3.0));
            let lambda = rng.gen_range(0.0..0.02);
            let b0 = Vector3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            let rho0 = QubitState::from_bloch(&b0).unwrap();
            let a = prep.rotation_amplitude(ip, im);
            let g = pauli::x() * (a + a.conj()) + pauli::y() * (I * (a - a.conj()));
            let half = g * rho0.matrix() * Complex64::new(0.0, -lambda);
            let want = rho0.matrix() + half + half.adjoint();
            let got = coherent_first_order(ip, im, &prep, lambda, &rho0);
            assert!((got.state.matrix() - want).norm() < 1e-13);
            let (tr, _) = pauli::components(&(got.state.matrix() - rho0.matrix()));
            assert!(tr.norm() < 1e-15);
            assert!(state::hermiticity_defect(got.state.matrix()) < 1e-15);
        }
    }

    #[test]
    fn coherent_scaling_and_validity_flag() {
        let rho0 = QubitState::ground();
        let prep = CoherentPrep::from_polar(1, 1.0, 0.0);
        let (ip, im) = (c(0.3, 0.1), c(2.0, -0.4));
        let d1 = coherent_first_order(ip, im, &prep, 0.001, &rho0).delta_b;
        let d2 = coherent_first_order(ip, im, &prep, 0.002, &rho0).delta_b;
        assert!((d2 - 2.0 * d1).norm() <= 1e-10 * d2.norm());
        assert!(!coherent_first_order(ip, im, &prep, 0.05, &rho0).validity_warning);
        assert!(coherent_first_order(ip, im, &prep, 0.06, &rho0).validity_warning);
    }

    #[test]
    fn vacuum_first_order_is_zero_and_guarded() {
        let t = table_of(&[(c(3.0, 1.0), c(-2.0, 5.0)), (c(40.0, 0.0), c(0.0, 30.0))], 5.0);
        let rho0 = QubitState::from_bloch(&Vector3::new(0.6, 0.0, 0.3)).unwrap();
        let zero = vacuum_first_order_check(&t, &FieldPrep::Vacuum, 1.0, &rho0).unwrap();
        assert_eq!(zero, Operator2::zeros());
        let coherent = FieldPrep::Coherent(CoherentPrep::from_polar(1, 1.0, 0.0));
        assert!(vacuum_first_order_check(&t, &coherent, 1.0, &rho0).is_err());
        // the same machinery is nonzero once the mode carries an amplitude
        let nonzero = first_order_reduced(&t, &[(1, c(1.0, 0.0))], 0.1, &rho0).unwrap();
        assert!(nonzero.norm() > 0.0);
        let (tr, _) = pauli::components(&nonzero);
        assert!(tr.norm() < 1e-15);
        assert!(state::hermiticity_defect(&nonzero) < 1e-15);
    }
}
