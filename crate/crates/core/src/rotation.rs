//! Bloch rotations induced by a coherent field, their exact composition and
//! parameter scans of the rotation axis.
//!
//! A rotation by δ about the unit axis n̂ acts on qubit states as
//! U = exp(-i δ/2 n̂·σ) and is stored as the unit quaternion
//! (cos δ/2, sin δ/2 n̂). Composition is ordered: the first rotation in a
//! list is applied first.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{Quaternion, Unit, UnitQuaternion, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::CavityConfig;
use crate::error::{Error, Result};
use crate::oscillatory::{self, QuadratureOptions};
use crate::perturbation::{pauli, rotation_generator, CoherentPrep, Operator2};
use crate::worldline::TrajectorySegment;

/// Below this angle the axis of a rotation is reported as undefined.
pub const DEGENERATE_ANGLE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationSpec {
    /// Axis as produced; not normalized.
    pub axis: Vector3<f64>,
    /// Rotation angle δ ≥ 0.
    pub angle: f64,
    /// atan2(n_y, n_x), NaN when δ is below [`DEGENERATE_ANGLE`].
    pub azimuth: f64,
}

impl RotationSpec {
    pub fn identity() -> Self {
        Self {
            axis: Vector3::zeros(),
            angle: 0.0,
            azimuth: f64::NAN,
        }
    }

    /// Rotation by `angle` about `axis`; a negative angle flips the axis.
    pub fn about(axis: Vector3<f64>, angle: f64) -> Self {
        let (axis, angle) = if angle < 0.0 { (-axis, -angle) } else { (axis, angle) };
        let azimuth = if angle < DEGENERATE_ANGLE || axis.norm() == 0.0 {
            f64::NAN
        } else {
            axis.y.atan2(axis.x)
        };
        Self { axis, angle, azimuth }
    }

    /// Equatorial rotation with axis (cos φ, sin φ, 0).
    pub fn equatorial(azimuth: f64, angle: f64) -> Self {
        Self::about(Vector3::new(azimuth.cos(), azimuth.sin(), 0.0), angle)
    }

    pub fn has_axis(&self) -> bool {
        !self.azimuth.is_nan()
    }

    pub fn unit_axis(&self) -> Option<Vector3<f64>> {
        let n = self.axis.norm();
        (n > 0.0).then(|| self.axis / n)
    }

    pub fn inverse(&self) -> Self {
        Self::about(-self.axis, self.angle)
    }

    pub fn to_net(&self) -> NetRotation {
        match self.unit_axis() {
            Some(n) if self.angle != 0.0 => NetRotation::from_axis_angle(&n, self.angle),
            _ => NetRotation::identity(),
        }
    }
}

/// Composed SU(2) action as a unit quaternion, identified up to sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 4]", try_from = "[f64; 4]")]
pub struct NetRotation {
    q: UnitQuaternion<f64>,
}

impl From<NetRotation> for [f64; 4] {
    fn from(r: NetRotation) -> Self {
        r.components()
    }
}

impl TryFrom<[f64; 4]> for NetRotation {
    type Error = Error;
    fn try_from(c: [f64; 4]) -> Result<Self> {
        Self::from_components(c)
    }
}

impl NetRotation {
    pub fn identity() -> Self {
        Self {
            q: UnitQuaternion::identity(),
        }
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        match Unit::try_new(*axis, 0.0) {
            Some(n) => Self {
                q: UnitQuaternion::from_axis_angle(&n, angle),
            },
            None => Self::identity(),
        }
    }

    /// From (w, x, y, z); must be unit to 10⁻⁸.
    pub fn from_components(c: [f64; 4]) -> Result<Self> {
        let q = Quaternion::new(c[0], c[1], c[2], c[3]);
        if c.iter().any(|v| !v.is_finite()) || (q.norm() - 1.0).abs() > 1e-8 {
            return Err(Error::Domain(format!("{c:?} is not a unit quaternion")));
        }
        Ok(Self {
            q: UnitQuaternion::new_normalize(q),
        })
    }

    /// From a 2×2 unitary, ignoring its global phase.
    pub fn from_unitary(u: &Operator2) -> Result<Self> {
        let defect = (u.adjoint() * u - pauli::identity()).norm();
        if !defect.is_finite() || defect > 1e-8 {
            return Err(Error::Domain(format!("matrix is not unitary (defect {defect:e})")));
        }
        let det = u.determinant();
        let v = u / det.sqrt();
        let half = Complex64::new(0.5, 0.0);
        let i_half = Complex64::new(0.0, 0.5);
        let w = ((v.trace()) * half).re;
        let x = ((pauli::x() * v).trace() * i_half).re;
        let y = ((pauli::y() * v).trace() * i_half).re;
        let z = ((pauli::z() * v).trace() * i_half).re;
        Ok(Self {
            q: UnitQuaternion::new_normalize(Quaternion::new(w, x, y, z)),
        })
    }

    pub fn quaternion(&self) -> &UnitQuaternion<f64> {
        &self.q
    }

    /// (w, x, y, z).
    pub fn components(&self) -> [f64; 4] {
        [self.q.w, self.q.i, self.q.j, self.q.k]
    }

    /// U = w - i(x σ_x + y σ_y + z σ_z).
    pub fn unitary(&self) -> Operator2 {
        let [w, x, y, z] = self.components();
        let r = |v: f64| Complex64::new(v, 0.0);
        let mi = Complex64::new(0.0, -1.0);
        pauli::identity() * r(w) + (pauli::x() * r(x) + pauli::y() * r(y) + pauli::z() * r(z)) * mi
    }

    /// Angle in [0, π] and unit axis; the axis is `None` for the identity.
    pub fn axis_angle(&self) -> (Option<Vector3<f64>>, f64) {
        // fold q and -q together so the angle never exceeds π
        let q = if self.q.w < 0.0 { -*self.q.quaternion() } else { *self.q.quaternion() };
        let v = q.vector();
        let s = v.norm();
        let angle = 2.0 * s.atan2(q.w);
        if s == 0.0 {
            (None, 0.0)
        } else {
            (Some(v / s), angle)
        }
    }

    pub fn angle(&self) -> f64 {
        self.axis_angle().1
    }

    pub fn inverse(&self) -> Self {
        Self { q: self.q.inverse() }
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &NetRotation) -> Self {
        Self { q: next.q * self.q }
    }

    /// |Tr(U†V)|/2.
    pub fn fidelity(&self, other: &NetRotation) -> f64 {
        self.q.coords.dot(&other.q.coords).abs().min(1.0)
    }

    /// Acts on a Bloch vector.
    pub fn apply(&self, b: &Vector3<f64>) -> Vector3<f64> {
        self.q.transform_vector(b)
    }
}

/// Rotation generated by a coherent state at first order.
///
/// With A = α*I₊ + αI₋*: n = (2 Re A, -2 Im A, 0) and δ = 2λ|n| = 4λ|A|.
pub fn extract_rotation(i_plus: Complex64, i_minus: Complex64, prep: &CoherentPrep, coupling: f64) -> RotationSpec {
    let a = prep.rotation_amplitude(i_plus, i_minus);
    let axis = rotation_generator(a);
    let angle = 2.0 * coupling * axis.norm();
    let azimuth = if angle < DEGENERATE_ANGLE { f64::NAN } else { axis.y.atan2(axis.x) };
    RotationSpec { axis, angle, azimuth }
}

/// Exact product of `rotations`, applied in list order.
pub fn compose(rotations: &[RotationSpec]) -> NetRotation {
    rotations
        .iter()
        .fold(NetRotation::identity(), |acc, r| acc.then(&r.to_net()))
}

/// Where a scan segment starts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Launch {
    /// At rest at the wall behind the motion: x = 0 for a > 0, x = L for
    /// a < 0, and the cavity centre for a = 0.
    #[default]
    Wall,
    At(f64),
}

impl Launch {
    pub fn segment(&self, cfg: &CavityConfig, acceleration: f64, duration: f64) -> Result<TrajectorySegment> {
        let x0 = match *self {
            Launch::At(x) => x,
            Launch::Wall if acceleration > 0.0 => 0.0,
            Launch::Wall if acceleration < 0.0 => cfg.length,
            Launch::Wall => 0.5 * cfg.length,
        };
        if acceleration == 0.0 {
            TrajectorySegment::inertial(x0, duration)
        } else {
            TrajectorySegment::accelerated(acceleration, x0, duration)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    /// Value of the scanned parameter (a or T).
    pub param: f64,
    pub phi_wrapped: f64,
    pub phi_unwrapped: f64,
    pub delta: f64,
    pub i_plus: Complex64,
    pub i_minus: Complex64,
    pub abs_error: f64,
    /// Set when the point could not be evaluated.
    pub error: Option<String>,
}

impl ScanRow {
    fn failed(param: f64, err: &Error) -> Self {
        Self {
            param,
            phi_wrapped: f64::NAN,
            phi_unwrapped: f64::NAN,
            delta: f64::NAN,
            i_plus: Complex64::new(f64::NAN, f64::NAN),
            i_minus: Complex64::new(f64::NAN, f64::NAN),
            abs_error: f64::NAN,
            error: Some(err.to_string()),
        }
    }

    fn evaluated(param: f64, ip: Complex64, im: Complex64, abs_error: f64, prep: &CoherentPrep, coupling: f64) -> Self {
        let r = extract_rotation(ip, im, prep, coupling);
        Self {
            param,
            phi_wrapped: r.azimuth,
            phi_unwrapped: f64::NAN,
            delta: r.angle,
            i_plus: ip,
            i_minus: im,
            abs_error,
            error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanTable {
    /// "a" or "T".
    pub parameter: String,
    pub rows: Vec<ScanRow>,
}

impl ScanTable {
    fn new(parameter: &str, mut rows: Vec<ScanRow>) -> Self {
        unwrap_azimuths(&mut rows);
        Self {
            parameter: parameter.to_string(),
            rows,
        }
    }

    /// max - min of the unwrapped azimuth over rows with a defined axis.
    pub fn spread(&self) -> Option<f64> {
        spread_of(self.rows.iter())
    }

    /// Spreads over the first and second halves of the parameter window.
    pub fn half_window_spreads(&self) -> (Option<f64>, Option<f64>) {
        let defined: Vec<_> = self.rows.iter().filter(|r| r.param.is_finite()).collect();
        if defined.is_empty() {
            return (None, None);
        }
        let lo = defined.iter().map(|r| r.param).fold(f64::INFINITY, f64::min);
        let hi = defined.iter().map(|r| r.param).fold(f64::NEG_INFINITY, f64::max);
        let mid = 0.5 * (lo + hi);
        (
            spread_of(self.rows.iter().filter(|r| r.param <= mid)),
            spread_of(self.rows.iter().filter(|r| r.param >= mid)),
        )
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    /// CSV with angles in degrees and a `#` footer of spread statistics.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "{},phi_wrapped_deg,phi_unwrapped_deg,delta,ip_re,ip_im,im_re,im_im,err,flag",
            self.parameter
        )?;
        for r in &self.rows {
            let flag = match &r.error {
                Some(e) => format!("\"{}\"", e.replace('"', "'")),
                None if r.phi_wrapped.is_nan() => "undefined_axis".to_string(),
                None => "ok".to_string(),
            };
            writeln!(
                w,
                "{},{:.12},{:.12},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.3e},{}",
                r.param,
                r.phi_wrapped.to_degrees(),
                r.phi_unwrapped.to_degrees(),
                r.delta,
                r.i_plus.re,
                r.i_plus.im,
                r.i_minus.re,
                r.i_minus.im,
                r.abs_error,
                flag
            )?;
        }
        let deg = |v: Option<f64>| v.map_or("nan".to_string(), |s| format!("{:.6}", s.to_degrees()));
        let (first, second) = self.half_window_spreads();
        writeln!(w, "# phi_spread_deg={}", deg(self.spread()))?;
        writeln!(w, "# phi_spread_first_half_deg={}", deg(first))?;
        writeln!(w, "# phi_spread_second_half_deg={}", deg(second))?;
        writeln!(w, "# failed_rows={}", self.failures())
    }
}

fn spread_of<'a>(rows: impl Iterator<Item = &'a ScanRow>) -> Option<f64> {
    let (lo, hi) = rows
        .filter(|r| !r.phi_unwrapped.is_nan())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.phi_unwrapped), hi.max(r.phi_unwrapped))
        });
    (lo <= hi).then_some(hi - lo)
}

/// Adds multiples of 2π so consecutive defined azimuths differ by less than π.
pub fn unwrap_azimuths(rows: &mut [ScanRow]) {
    let mut previous: Option<f64> = None;
    for r in rows.iter_mut() {
        if r.phi_wrapped.is_nan() {
            r.phi_unwrapped = f64::NAN;
            continue;
        }
        let mut phi = r.phi_wrapped;
        if let Some(p) = previous {
            phi += (2.0 * PI) * ((p - phi) / (2.0 * PI)).round();
        }
        r.phi_unwrapped = phi;
        previous = Some(phi);
    }
}

/// Rotation axis versus acceleration at fixed duration, one row per entry of
/// `accelerations` in the given order.
pub fn azimuth_scan(
    cfg: &CavityConfig,
    prep: &CoherentPrep,
    duration: f64,
    accelerations: &[f64],
    launch: Launch,
    opts: &QuadratureOptions,
) -> Result<ScanTable> {
    cfg.validate()?;
    prep.validate(cfg)?;
    let rows = accelerations
        .par_iter()
        .map(|&a| {
            let point = launch.segment(cfg, a, duration).and_then(|seg| {
                let (i, _) = oscillatory::mode_integrals(&seg, cfg, prep.mode, duration, false, opts)?;
                Ok((i.plus, i.minus))
            });
            match point {
                Ok((p, m)) => ScanRow::evaluated(
                    a,
                    p.value,
                    m.value,
                    p.abs_error.max(m.abs_error),
                    prep,
                    cfg.coupling,
                ),
                Err(e) => ScanRow::failed(a, &e),
            }
        })
        .collect();
    Ok(ScanTable::new("a", rows))
}

/// Rotation axis versus interaction time along one trajectory. A single
/// sweep supplies every time; rows beyond the cavity exit are flagged.
pub fn axis_vs_time(
    cfg: &CavityConfig,
    prep: &CoherentPrep,
    trajectory: &TrajectorySegment,
    times: &[f64],
    opts: &QuadratureOptions,
) -> Result<ScanTable> {
    cfg.validate()?;
    prep.validate(cfg)?;
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&i, &j| times[i].total_cmp(&times[j]));

    let limit = trajectory.exit_time(cfg.length).unwrap_or(f64::INFINITY).min(trajectory.duration);
    let usable: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| times[i].is_finite() && times[i] >= 0.0 && times[i] <= limit)
        .collect();
    let sorted_times: Vec<f64> = usable.iter().map(|&i| times[i]).collect();

    let mut rows: Vec<Option<ScanRow>> = vec![None; times.len()];
    if !sorted_times.is_empty() {
        let base = trajectory.with_duration(*sorted_times.last().unwrap());
        let checkpoints = oscillatory::cumulative_integrals(&base, cfg, prep.mode, &sorted_times, opts)?;
        for (&i, c) in usable.iter().zip(&checkpoints) {
            rows[i] = Some(ScanRow::evaluated(
                times[i],
                c.integrals[0],
                c.integrals[1],
                c.errors[0].max(c.errors[1]),
                prep,
                cfg.coupling,
            ));
        }
    }
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.unwrap_or_else(|| {
                let t = times[i];
                let err = match trajectory.position(t.min(trajectory.duration)) {
                    Ok(ev) if t <= trajectory.duration => Error::OutOfCavity {
                        x: ev.x,
                        length: cfg.length,
                        tau: t,
                    },
                    _ => Error::Domain(format!("time {t} outside the trajectory [0, {}]", trajectory.duration)),
                };
                ScanRow::failed(t, &err)
            })
        })
        .collect();
    Ok(ScanTable::new("T", rows))
}
