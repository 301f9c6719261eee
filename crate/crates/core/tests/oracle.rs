use std::f64::consts::PI;

use accelgates::oracle::{
    self, coherent_mass_cutoff, FieldInit, OracleOptions, TruncatedFieldSpec, COHERENT_MASS, NORM_DRIFT_LIMIT,
};
use accelgates::perturbation::{CoherentPrep, QubitState};
use accelgates::{CavityConfig, QuadratureOptions, TrajectorySegment};
use nalgebra::Vector3;

fn wide_cavity(n_modes: usize, coupling: f64) -> CavityConfig {
    CavityConfig::new(25.0 * PI, n_modes, 1.0, coupling).unwrap()
}

fn from_wall() -> TrajectorySegment {
    TrajectorySegment::accelerated(1.0, 0.0, 5.0).unwrap()
}

#[test]
fn vacuum_cutoff_ladder_settles() {
    let cfg = wide_cavity(3, 1e-2);
    let rep = oracle::convergence_check(
        &from_wall(),
        &cfg,
        &FieldInit::Vacuum,
        &QubitState::ground(),
        5.0,
        &[(3, 1), (3, 2), (3, 3)],
        &OracleOptions::default(),
    )
    .unwrap();
    println!("{:?}", rep.differences);
    assert!(rep.monotone && rep.converged);
    assert!(rep.differences[1] < 1e-6);
}

#[test]
fn uncoupled_ladder_is_flat() {
    let rho0 = QubitState::from_bloch(&Vector3::new(0.2, -0.1, 0.6)).unwrap();
    let rep = oracle::convergence_check(
        &from_wall(),
        &wide_cavity(2, 0.0),
        &FieldInit::Vacuum,
        &rho0,
        5.0,
        &[(2, 1), (2, 2), (2, 3)],
        &OracleOptions::default(),
    )
    .unwrap();
    assert!(rep.differences.iter().all(|&d| d == 0.0));
    assert!(rep.rungs.iter().all(|r| Vector3::from(r.bloch) == rho0.bloch()));
}

#[test]
fn coherent_cutoff_keeps_the_mass() {
    let spec = TruncatedFieldSpec::coherent(1, CoherentPrep::from_polar(1, 0.5, 0.3), 1);
    assert!(spec.n_max[0] >= coherent_mass_cutoff(0.5));
    let r = oracle::exact_evolve(
        &from_wall(),
        &wide_cavity(1, 1e-3),
        &spec,
        &QubitState::ground(),
        5.0,
        &OracleOptions::default(),
    )
    .unwrap();
    assert!(r.diagnostics.truncated_norm.powi(2) >= COHERENT_MASS);
    assert!(r.diagnostics.norm_drift <= NORM_DRIFT_LIMIT);
    r.state.check(1e-9).unwrap();
}

#[test]
fn vacuum_change_is_quadratic_in_coupling() {
    // no first-order term: halving λ quarters Δb
    let field = TruncatedFieldSpec::vacuum(2, 2);
    let b = Vector3::new(0.4, 0.1, 0.3);
    let rho0 = QubitState::from_bloch(&b).unwrap();
    let norms: Vec<f64> = [1e-4, 5e-5]
        .iter()
        .map(|&l| {
            let r = oracle::exact_evolve(&from_wall(), &wide_cavity(2, l), &field, &rho0, 5.0, &OracleOptions::default())
                .unwrap();
            assert!(r.diagnostics.norm_drift <= NORM_DRIFT_LIMIT);
            r.delta_b.norm()
        })
        .collect();
    let ratio = norms[0] / norms[1];
    assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
}

#[test]
fn vacuum_second_order_residual_scales_as_fourth_power() {
    let cfg = wide_cavity(3, 1e-2);
    let field = TruncatedFieldSpec::vacuum(3, 3);
    for b in [Vector3::new(0.0, 0.0, -1.0), Vector3::new(0.3, -0.4, 0.5)] {
        let r = oracle::vacuum_halving(
            &from_wall(),
            &cfg,
            &field,
            &QubitState::from_bloch(&b).unwrap(),
            5.0,
            &QuadratureOptions::default(),
            &OracleOptions::default(),
        )
        .unwrap();
        assert!((14.0..=18.0).contains(&r.ratio), "ratio {}", r.ratio);
        assert!(r.residuals[0] < 1e-2 * r.exact_norms[0]);
    }
}

#[test]
fn coherent_residual_halves_with_coupling() {
    let cfg = wide_cavity(1, 1e-3);
    let field = TruncatedFieldSpec::coherent(1, CoherentPrep::from_polar(1, 1.0, 0.0), 1);
    let r = oracle::coherent_halving(
        &from_wall(),
        &cfg,
        &field,
        &QubitState::ground(),
        5.0,
        &QuadratureOptions::default(),
        &OracleOptions::default(),
    )
    .unwrap();
    assert!(r.residuals[0] <= 0.05);
    assert!((1.5..=2.5).contains(&r.ratio));
}
