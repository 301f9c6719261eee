//! Planning of multi-cavity protocols whose composed rotations approximate a
//! target single-qubit gate.
//!
//! Every segment rotates the qubit about an equatorial axis whose azimuth is
//! set by the acceleration and duration, by an angle proportional to λ|α|.
//! The planner tabulates the reachable axes on an (a, T) grid, picks two
//! axes as close to orthogonal as the grid allows, decomposes the target
//! into rotations about them and realizes each factor with repeated small
//! segments.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::CavityConfig;
use crate::error::{Error, Result};
use crate::oscillatory::{self, QuadratureOptions};
use crate::perturbation::{CoherentPrep, COHERENT_VALIDITY_LIMIT};
use crate::rotation::{compose, extract_rotation, Launch, NetRotation, RotationSpec};
use crate::worldline::TrajectorySegment;

/// Longest segment duration the planner will emit.
pub const MAX_SEGMENT_DURATION: f64 = 100.0;
/// Minimum azimuth spread (as axis lines) required to plan.
pub const MIN_AXIS_SPREAD: f64 = 10.0 * PI / 180.0;

const ROOT_ITERATIONS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateSegment {
    pub acceleration: f64,
    pub duration: f64,
    pub alpha: Complex64,
    pub mode: usize,
    pub cavity: CavityConfig,
}

impl GateSegment {
    pub fn trajectory(&self) -> Result<TrajectorySegment> {
        Launch::Wall.segment(&self.cavity, self.acceleration, self.duration)
    }

    pub fn prep(&self) -> CoherentPrep {
        CoherentPrep::new(self.mode, self.alpha)
    }

    pub fn validate(&self) -> Result<()> {
        self.cavity.validate()?;
        self.prep().validate(&self.cavity)?;
        if !(0.0..=MAX_SEGMENT_DURATION).contains(&self.duration) {
            return Err(Error::InvalidConfig(format!(
                "segment duration {} outside [0, {MAX_SEGMENT_DURATION}]",
                self.duration
            )));
        }
        let strength = self.cavity.coupling * self.alpha.norm();
        if strength > COHERENT_VALIDITY_LIMIT * (1.0 + 1e-12) {
            return Err(Error::InvalidConfig(format!(
                "λ|α| = {strength} exceeds {COHERENT_VALIDITY_LIMIT}"
            )));
        }
        let seg = self.trajectory()?;
        self.cavity.ensure_inside(seg.end().x, self.duration)
    }
}

/// First-order rotation produced by one segment.
pub fn segment_rotation(seg: &GateSegment, opts: &QuadratureOptions) -> Result<RotationSpec> {
    seg.validate()?;
    let trajectory = seg.trajectory()?;
    let (i, _) = oscillatory::mode_integrals(&trajectory, &seg.cavity, seg.mode, seg.duration, false, opts)?;
    Ok(extract_rotation(i.plus.value, i.minus.value, &seg.prep(), seg.cavity.coupling))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisConstraints {
    pub a_max: f64,
    pub t_max: f64,
    pub coupling: f64,
    pub alpha_max: f64,
    pub max_segments: usize,
}

impl SynthesisConstraints {
    fn check(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let mut problems = Vec::new();
        if !positive(self.a_max) {
            problems.push(format!("a_max = {} must be positive", self.a_max));
        }
        if !positive(self.t_max) {
            problems.push(format!("t_max = {} must be positive", self.t_max));
        }
        if !positive(self.coupling) {
            problems.push(format!("coupling = {} must be positive", self.coupling));
        }
        if !positive(self.alpha_max) {
            problems.push(format!("alpha_max = {} must be positive", self.alpha_max));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Planning(format!("infeasible constraints: {}", problems.join("; "))))
        }
    }

    /// Largest usable λ|α|.
    pub fn strength_cap(&self) -> f64 {
        (self.coupling * self.alpha_max).min(COHERENT_VALIDITY_LIMIT)
    }
}

/// The cavity every segment is flown through.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityTemplate {
    pub length: f64,
    pub omega_gap: f64,
    pub mode: usize,
    /// Arg α of the prepared coherent state.
    #[serde(default)]
    pub alpha_phase: f64,
}

impl Default for CavityTemplate {
    fn default() -> Self {
        Self {
            length: PI,
            omega_gap: 1.0,
            mode: 1,
            alpha_phase: 0.0,
        }
    }
}

impl CavityTemplate {
    fn cavity(&self, coupling: f64) -> Result<CavityConfig> {
        CavityConfig::new(self.length, self.mode, self.omega_gap, coupling)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridResolution {
    /// Points on each side of a = 0.
    pub accelerations: usize,
    pub durations: usize,
}

impl Default for GridResolution {
    fn default() -> Self {
        Self {
            accelerations: 24,
            durations: 10,
        }
    }
}

/// One reachable segment shape with |α| = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub acceleration: f64,
    pub duration: f64,
    pub azimuth: f64,
    /// |A| at unit |α|; the rotation angle is 4λ|α| times this.
    pub response: f64,
}

/// Reachable axes for one template and constraint set.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisGrid {
    pub points: Vec<GridPoint>,
    pub durations: Vec<f64>,
}

impl AxisGrid {
    /// Largest separation (as undirected lines, in [0, π/2]) between any two
    /// grid axes.
    pub fn spread(&self) -> f64 {
        let mut best = 0.0_f64;
        for (i, p) in self.points.iter().enumerate() {
            for q in &self.points[i + 1..] {
                best = best.max(line_separation(p.azimuth, q.azimuth));
            }
        }
        best
    }
}

/// Angle in [0, π/2] between two undirected lines with the given azimuths.
fn line_separation(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

fn evaluate(cavity: &CavityConfig, prep: &CoherentPrep, a: f64, t: f64, opts: &QuadratureOptions) -> Result<GridPoint> {
    let seg = Launch::Wall.segment(cavity, a, t)?;
    let (i, _) = oscillatory::mode_integrals(&seg, cavity, prep.mode, t, false, opts)?;
    let amp = prep.rotation_amplitude(i.plus.value, i.minus.value);
    Ok(GridPoint {
        acceleration: a,
        duration: t,
        azimuth: (-amp.im).atan2(amp.re),
        response: amp.norm(),
    })
}

fn fits(cavity: &CavityConfig, a: f64, t: f64) -> bool {
    match Launch::Wall.segment(cavity, a, t) {
        Ok(seg) => seg.exit_time(cavity.length).is_none_or(|exit| t <= exit),
        Err(_) => false,
    }
}

/// Tabulates axis azimuth and response over the (a, T) grid, skipping
/// shapes that leave the cavity or produce no rotation.
pub fn build_grid(
    template: &CavityTemplate,
    constraints: &SynthesisConstraints,
    resolution: &GridResolution,
    opts: &QuadratureOptions,
) -> Result<AxisGrid> {
    constraints.check()?;
    let cavity = template.cavity(constraints.coupling)?;
    let prep = CoherentPrep::from_polar(template.mode, 1.0, template.alpha_phase);
    let n_a = resolution.accelerations.max(1);
    let n_t = resolution.durations.max(1);
    let t_top = constraints.t_max.min(MAX_SEGMENT_DURATION);
    let durations: Vec<f64> = (1..=n_t).map(|k| t_top * k as f64 / n_t as f64).collect();
    let mut shapes = Vec::new();
    for &t in &durations {
        for k in (1..=n_a).rev() {
            shapes.push((-constraints.a_max * k as f64 / n_a as f64, t));
        }
        for k in 1..=n_a {
            shapes.push((constraints.a_max * k as f64 / n_a as f64, t));
        }
    }
    let points: Vec<GridPoint> = shapes
        .par_iter()
        .filter(|(a, t)| fits(&cavity, *a, *t))
        .map(|&(a, t)| evaluate(&cavity, &prep, a, t, opts))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.response > 1e-12)
        .collect();
    Ok(AxisGrid { points, durations })
}

/// Result of planning; `success` is false for best-effort plans.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateSequence {
    pub segments: Vec<GateSegment>,
    pub rotations: Vec<RotationSpec>,
    pub predicted: NetRotation,
    pub target: NetRotation,
    pub fidelity: f64,
    pub success: bool,
    pub diagnostics: PlanDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanDiagnostics {
    pub grid_points: usize,
    /// Largest axis separation available on the grid (rad).
    pub axis_spread: f64,
    /// Azimuths of the two axes used (rad).
    pub axes: [f64; 2],
    /// Separation between the two axes actually used (rad).
    pub separation: f64,
    /// Segments of the full plan before the segment budget was applied.
    pub planned_segments: usize,
}

impl GateSequence {
    fn empty(target: NetRotation, diagnostics: PlanDiagnostics) -> Self {
        Self {
            segments: Vec::new(),
            rotations: Vec::new(),
            predicted: NetRotation::identity(),
            target,
            fidelity: NetRotation::identity().fidelity(&target),
            success: true,
            diagnostics,
        }
    }

    /// Plan document with per-segment parameters, predicted rotations,
    /// composed rotation and fidelity.
    pub fn to_json(&self) -> serde_json::Value {
        let segments: Vec<_> = self
            .segments
            .iter()
            .zip(&self.rotations)
            .map(|(s, r)| {
                serde_json::json!({
                    "a": s.acceleration,
                    "T": s.duration,
                    "alpha_abs": s.alpha.norm(),
                    "alpha_arg": s.alpha.arg(),
                    "mode": s.mode,
                    "cavity_length": s.cavity.length,
                    "omega_gap": s.cavity.omega_gap,
                    "coupling": s.cavity.coupling,
                    "axis_azimuth": if r.has_axis() { Some(r.azimuth) } else { None },
                    "angle": r.angle,
                })
            })
            .collect();
        let (axis, angle) = self.predicted.axis_angle();
        serde_json::json!({
            "segments": segments,
            "composed": {
                "quaternion": self.predicted.components(),
                "axis": axis.map(|v| [v.x, v.y, v.z]),
                "angle": angle,
            },
            "target": self.target.components(),
            "fidelity": self.fidelity,
            "success": self.success,
            "diagnostics": self.diagnostics,
        })
    }
}

/// A rotation about one of the two planning axes.
#[derive(Debug, Clone, Copy)]
struct Factor {
    axis: usize,
    angle: f64,
}

fn rodrigues(axis: &Vector3<f64>, angle: f64, v: &Vector3<f64>) -> Vector3<f64> {
    let (s, c) = angle.sin_cos();
    v * c + axis.cross(v) * s + axis * (axis.dot(v) * (1.0 - c))
}

/// Signed angle taking `from` to `to` about `axis`, both projected onto the
/// plane normal to `axis`. `None` when either projection vanishes.
fn signed_angle(axis: &Vector3<f64>, from: &Vector3<f64>, to: &Vector3<f64>) -> Option<f64> {
    let f = from - axis * axis.dot(from);
    let t = to - axis * axis.dot(to);
    if f.norm() < 1e-12 || t.norm() < 1e-12 {
        return None;
    }
    Some(axis.dot(&f.cross(&t)).atan2(f.dot(&t)))
}

/// Angle of the rotation about `axis` left in `r`, which must fix `axis`.
fn residual_angle(r: &NetRotation, axis: &Vector3<f64>) -> f64 {
    let q = r.quaternion();
    2.0 * axis.dot(&q.vector().into_owned()).atan2(q.w)
}

/// Factors f₁, f₂, ... (applied in that order) about e₁ = axes[0] and
/// e₂ = axes[1] whose product is `target`.
fn decompose(target: &NetRotation, e1: &Vector3<f64>, e2: &Vector3<f64>) -> Vec<Factor> {
    if e1.dot(e2) < 0.0 {
        // a rotation about -e₂ is the inverse rotation about e₂
        let mut factors = decompose(target, e1, &-e2);
        for f in factors.iter_mut().filter(|f| f.axis == 1) {
            f.angle = -f.angle;
        }
        return factors;
    }
    let cos_beta = e1.dot(e2);
    let beta = cos_beta.clamp(-1.0, 1.0).acos();
    let sin2 = 1.0 - cos_beta * cos_beta;
    let rotate = |axis: usize, angle: f64| {
        let v = if axis == 0 { e1 } else { e2 };
        NetRotation::from_axis_angle(v, angle)
    };

    // Pull the image of e₁ back within 2β of e₁ with (e₁, e₂) pairs that
    // will be applied after the core triple.
    let mut pulls = Vec::new();
    let mut remaining = *target;
    for _ in 0..64 {
        let v = remaining.apply(e1);
        let gamma = e1.dot(&v).clamp(-1.0, 1.0).acos();
        if gamma <= 2.0 * beta * (1.0 - 1e-9) {
            break;
        }
        let p = signed_angle(e1, &v, e2).unwrap_or(0.0);
        let w = rodrigues(e1, p, &v);
        let goal = (gamma - 2.0 * beta).max(1.9 * beta);
        let ev = e1.dot(&w);
        let tv = cos_beta * e2.dot(&w);
        let denom = ev - tv;
        let q = if denom.abs() < 1e-15 {
            PI
        } else {
            ((goal.cos() - tv) / denom).clamp(-1.0, 1.0).acos()
        };
        // remaining = R₂(q) R₁(p) · remaining, so target = R₁(-p) R₂(-q) · remaining
        let pull = NetRotation::from_axis_angle(e1, p).then(&NetRotation::from_axis_angle(e2, q));
        remaining = remaining.then(&pull);
        pulls.push([Factor { axis: 1, angle: -q }, Factor { axis: 0, angle: -p }]);
    }

    // Core: remaining = R₁(θ₃) R₂(θ₂) R₁(θ₁).
    let v = remaining.apply(e1);
    let c2 = ((e1.dot(&v) - cos_beta * cos_beta) / sin2).clamp(-1.0, 1.0);
    let theta2 = c2.acos();
    let u = rodrigues(e2, theta2, e1);
    let theta3 = signed_angle(e1, &u, &v).unwrap_or(0.0);
    let partial = rotate(1, theta2).then(&rotate(0, theta3));
    let rest = remaining.then(&partial.inverse());
    let theta1 = residual_angle(&rest, e1);

    let mut factors = vec![
        Factor { axis: 0, angle: theta1 },
        Factor { axis: 1, angle: theta2 },
        Factor { axis: 0, angle: theta3 },
    ];
    factors.extend(pulls.into_iter().rev().flatten());
    factors
}

fn unit_axis(azimuth: f64) -> Vector3<f64> {
    Vector3::new(azimuth.cos(), azimuth.sin(), 0.0)
}

/// Wraps to (-π/2, π/2], the separation from 90° between two lines.
fn orthogonality_defect(phi: f64, reference: f64) -> f64 {
    let d = (phi - reference - FRAC_PI_2).rem_euclid(PI);
    if d > FRAC_PI_2 {
        d - PI
    } else {
        d
    }
}

/// Bisects in a along one grid row for an axis orthogonal to `reference`.
fn refine_orthogonal(
    cavity: &CavityConfig,
    prep: &CoherentPrep,
    reference: f64,
    lo: &GridPoint,
    hi: &GridPoint,
    opts: &QuadratureOptions,
) -> Result<Option<GridPoint>> {
    let (mut a, mut b) = (*lo, *hi);
    let (mut fa, fb) = (orthogonality_defect(a.azimuth, reference), orthogonality_defect(b.azimuth, reference));
    if fa == 0.0 {
        return Ok(Some(a));
    }
    if fa.signum() == fb.signum() || fa.abs() > 0.25 * PI || fb.abs() > 0.25 * PI {
        return Ok(None);
    }
    for _ in 0..ROOT_ITERATIONS {
        let mid = 0.5 * (a.acceleration + b.acceleration);
        if mid == a.acceleration || mid == b.acceleration {
            break;
        }
        let m = evaluate(cavity, prep, mid, a.duration, opts)?;
        let fm = orthogonality_defect(m.azimuth, reference);
        if fm == 0.0 {
            return Ok(Some(m));
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    let best = if orthogonality_defect(a.azimuth, reference).abs() <= orthogonality_defect(b.azimuth, reference).abs() {
        a
    } else {
        b
    };
    Ok((best.response > 1e-12).then_some(best))
}

/// Chooses the two planning axes: the grid pair closest to orthogonal with
/// the strongest weaker response, then an exactly orthogonal partner found
/// by root-finding when the grid brackets one.
fn choose_axes(
    grid: &AxisGrid,
    cavity: &CavityConfig,
    prep: &CoherentPrep,
    opts: &QuadratureOptions,
) -> Result<(GridPoint, GridPoint)> {
    let pts = &grid.points;
    let mut best_sep = 0.0_f64;
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i + 1..] {
            best_sep = best_sep.max(line_separation(p.azimuth, q.azimuth));
        }
    }
    let slack = 1.0_f64.to_radians();
    let mut pair = None;
    let mut pair_score = f64::NEG_INFINITY;
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i + 1..] {
            if line_separation(p.azimuth, q.azimuth) + slack >= best_sep {
                let score = p.response.min(q.response);
                if score > pair_score {
                    pair_score = score;
                    pair = Some((*p, *q));
                }
            }
        }
    }
    let (p, q) = pair.ok_or_else(|| Error::Planning("axis grid has fewer than two points".into()))?;

    let mut refined: Option<(GridPoint, GridPoint)> = None;
    for reference in [p, q] {
        for &t in &grid.durations {
            let row: Vec<&GridPoint> = pts.iter().filter(|g| g.duration == t).collect();
            for w in row.windows(2) {
                if w[0].acceleration.signum() != w[1].acceleration.signum() {
                    continue;
                }
                if let Some(partner) = refine_orthogonal(cavity, prep, reference.azimuth, w[0], w[1], opts)? {
                    let candidate = (reference, partner);
                    let better = refined.is_none_or(|(r0, r1)| {
                        candidate.0.response.min(candidate.1.response) > r0.response.min(r1.response)
                    });
                    if better {
                        refined = Some(candidate);
                    }
                }
            }
        }
    }
    Ok(refined.unwrap_or((p, q)))
}

/// Plans a sequence of segments approximating `target`.
///
/// Fully deterministic. When the full plan exceeds `max_segments` the
/// longest-prefix with the best fidelity is returned with `success` false.
pub fn synthesize(
    target: &NetRotation,
    template: &CavityTemplate,
    constraints: &SynthesisConstraints,
    resolution: &GridResolution,
    tol_fidelity: f64,
    opts: &QuadratureOptions,
) -> Result<GateSequence> {
    constraints.check()?;
    if !(0.0..1.0).contains(&tol_fidelity) {
        return Err(Error::InvalidConfig(format!("fidelity tolerance {tol_fidelity} outside [0, 1)")));
    }
    let blank = PlanDiagnostics {
        grid_points: 0,
        axis_spread: 0.0,
        axes: [f64::NAN; 2],
        separation: 0.0,
        planned_segments: 0,
    };
    if target.angle() < 1e-12 {
        return Ok(GateSequence::empty(*target, blank));
    }

    let cavity = template.cavity(constraints.coupling)?;
    let prep = CoherentPrep::from_polar(template.mode, 1.0, template.alpha_phase);
    let grid = build_grid(template, constraints, resolution, opts)?;
    let spread = grid.spread();
    if grid.points.len() < 2 || spread < MIN_AXIS_SPREAD {
        return Err(Error::Planning(format!(
            "reachable axis spread {:.3}° over {} grid points is below {:.0}°",
            spread.to_degrees(),
            grid.points.len(),
            MIN_AXIS_SPREAD.to_degrees()
        )));
    }

    let (g1, g2) = choose_axes(&grid, &cavity, &prep, opts)?;
    let axes = [g1, g2];
    let e = [unit_axis(g1.azimuth), unit_axis(g2.azimuth)];
    let factors = decompose(target, &e[0], &e[1]);

    let cap = constraints.strength_cap();
    let mut segments = Vec::new();
    for f in &factors {
        let angle = f.angle.rem_euclid(2.0 * PI);
        if angle < 1e-12 || 2.0 * PI - angle < 1e-12 {
            continue;
        }
        let g = axes[f.axis];
        let per_segment = 4.0 * cap * g.response;
        let m = (angle / per_segment).ceil().max(1.0);
        let magnitude = angle / (m * 4.0 * constraints.coupling * g.response);
        let seg = GateSegment {
            acceleration: g.acceleration,
            duration: g.duration,
            alpha: Complex64::from_polar(magnitude, template.alpha_phase),
            mode: template.mode,
            cavity,
        };
        segments.extend(std::iter::repeat_n(seg, m as usize));
    }

    let diagnostics = PlanDiagnostics {
        grid_points: grid.points.len(),
        axis_spread: spread,
        axes: [g1.azimuth, g2.azimuth],
        separation: line_separation(g1.azimuth, g2.azimuth),
        planned_segments: segments.len(),
    };

    // Identical shapes share one quadrature.
    let mut cache: Vec<(GateSegment, RotationSpec)> = Vec::new();
    let mut rotations = Vec::with_capacity(segments.len());
    for s in &segments {
        let r = match cache.iter().find(|(c, _)| c == s) {
            Some((_, r)) => *r,
            None => {
                let r = segment_rotation(s, opts)?;
                cache.push((*s, r));
                r
            }
        };
        rotations.push(r);
    }

    let budget = constraints.max_segments.min(segments.len());
    let mut best_len = 0;
    let mut best_fid = NetRotation::identity().fidelity(target);
    let mut running = NetRotation::identity();
    for (k, r) in rotations.iter().take(budget).enumerate() {
        running = running.then(&r.to_net());
        let fid = running.fidelity(target);
        if fid > best_fid {
            best_fid = fid;
            best_len = k + 1;
        }
    }
    segments.truncate(best_len);
    rotations.truncate(best_len);
    let predicted = compose(&rotations);
    let fidelity = predicted.fidelity(target);
    Ok(GateSequence {
        segments,
        rotations,
        predicted,
        target: *target,
        fidelity,
        success: fidelity >= 1.0 - tol_fidelity,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn opts() -> QuadratureOptions {
        QuadratureOptions::default()
    }

    fn constraints() -> SynthesisConstraints {
        SynthesisConstraints {
            a_max: 2.0,
            t_max: 5.0,
            coupling: 0.01,
            alpha_max: 1.0,
            max_segments: 10_000,
        }
    }

    #[test]
    fn segment_rotation_trivial_cases() {
        let cavity = CavityConfig::new(PI, 1, 1.0, 0.01).unwrap();
        let mut seg = GateSegment {
            acceleration: 1.0,
            duration: 2.0,
            alpha: Complex64::new(0.0, 0.0),
            mode: 1,
            cavity,
        };
        assert_eq!(segment_rotation(&seg, &opts()).unwrap().angle, 0.0);
        seg.alpha = Complex64::new(1.0, 0.0);
        seg.duration = 0.0;
        let r = segment_rotation(&seg, &opts()).unwrap();
        assert_eq!(r.angle, 0.0);
        assert_eq!(r.to_net(), NetRotation::identity());
    }

    #[test]
    fn segment_rotation_matches_direct_pipeline() {
        let cavity = CavityConfig::new(25.0 * PI, 1, 1.0, 0.01).unwrap();
        let seg = GateSegment {
            acceleration: 1.0,
            duration: 5.0,
            alpha: Complex64::new(1.0, 0.0),
            mode: 1,
            cavity,
        };
        let r = segment_rotation(&seg, &opts()).unwrap();
        let traj = TrajectorySegment::accelerated(1.0, 0.0, 5.0).unwrap();
        let (i, _) = oscillatory::mode_integrals(&traj, &cavity, 1, 5.0, false, &opts()).unwrap();
        let direct = extract_rotation(i.plus.value, i.minus.value, &seg.prep(), 0.01);
        assert_eq!(r, direct);
    }

    #[test]
    fn segment_validation() {
        let cavity = CavityConfig::new(PI, 1, 1.0, 0.01).unwrap();
        let good = GateSegment {
            acceleration: 0.5,
            duration: 1.0,
            alpha: Complex64::new(5.0, 0.0),
            mode: 1,
            cavity,
        };
        assert!(good.validate().is_ok());
        let strong = GateSegment { alpha: Complex64::new(6.0, 0.0), ..good };
        assert!(strong.validate().is_err());
        let long = GateSegment { acceleration: 0.0, duration: 101.0, ..good };
        assert!(long.validate().is_err());
        let escaping = GateSegment { acceleration: 1.0, duration: 5.0, ..good };
        assert!(matches!(escaping.validate(), Err(Error::OutOfCavity { .. })));
    }

    #[test]
    fn identity_target_gives_empty_plan() {
        let plan = synthesize(
            &NetRotation::identity(),
            &CavityTemplate::default(),
            &constraints(),
            &GridResolution::default(),
            1e-3,
            &opts(),
        )
        .unwrap();
        assert!(plan.segments.is_empty());
        assert_eq!(plan.fidelity, 1.0);
        assert!(plan.success);
    }

    #[test]
    fn infeasible_constraints_are_planning_errors() {
        let mut c = constraints();
        c.a_max = 0.0;
        let target = NetRotation::from_axis_angle(&Vector3::z(), 1.0);
        let err = synthesize(&target, &CavityTemplate::default(), &c, &GridResolution::default(), 1e-3, &opts());
        assert!(matches!(err, Err(Error::Planning(_))));
    }

    #[test]
    fn decomposition_reproduces_targets() {
        let cases = [
            (Vector3::new(0.0, 0.0, 1.0), 1.3),
            (Vector3::new(1.0, -2.0, 0.5), 3.0),
            (Vector3::new(0.3, 0.1, -0.9), 0.2),
            (Vector3::new(-1.0, 0.0, 0.0), PI),
        ];
        for beta in [FRAC_PI_2, 1.0, 0.4, 2.5] {
            let e1 = unit_axis(0.3);
            let e2 = unit_axis(0.3 + beta);
            for (axis, angle) in &cases {
                let target = NetRotation::from_axis_angle(axis, *angle);
                let factors = decompose(&target, &e1, &e2);
                let rebuilt = factors.iter().fold(NetRotation::identity(), |acc, f| {
                    acc.then(&NetRotation::from_axis_angle(if f.axis == 0 { &e1 } else { &e2 }, f.angle))
                });
                assert_abs_diff_eq!(rebuilt.fidelity(&target), 1.0, epsilon = 1e-12);
                if beta == FRAC_PI_2 {
                    assert_eq!(factors.len(), 3);
                }
            }
        }
    }

    #[test]
    fn line_geometry() {
        assert_abs_diff_eq!(line_separation(0.0, PI), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(line_separation(0.1, -0.1 + PI), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(orthogonality_defect(FRAC_PI_2 + 0.1, 0.0), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(orthogonality_defect(-FRAC_PI_2 - 0.1, 0.0), -0.1, epsilon = 1e-15);
    }
}
