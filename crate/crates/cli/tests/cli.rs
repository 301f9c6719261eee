use std::f64::consts::PI;
use std::io::Write;
use std::process::{Command, Output};

use accelgates::oscillatory;
use accelgates::perturbation::CoherentPrep;
use accelgates::rotation::extract_rotation;
use accelgates::{CavityConfig, QuadratureOptions, TrajectorySegment};

fn run(args: &[&str], config: Option<&str>) -> (Output, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_accelgates"));
    cmd.args(args);
    let file = config.map(|text| {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    });
    if let Some(f) = &file {
        cmd.arg("--config").arg(f.path());
    }
    let out = cmd.output().unwrap();
    let stdout = String::from_utf8(out.stdout.clone()).unwrap();
    (out, stdout)
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn cavity(length: f64, n_modes: usize, coupling: f64) -> String {
    format!(r#""cavity": {{"length": {length}, "n_modes": {n_modes}, "omega_gap": 1.0, "coupling": {coupling}}}"#)
}

#[test]
fn units_report_scales_with_gap() {
    let (out, text) = run(&["units", "--gap-hz", "1e9", "--accel", "1"], None);
    assert!(out.status.success());
    let g: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("a_in_g = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((1e15..1e17).contains(&g), "{g}");

    let (_, text) = run(&["units", "--gap-hz", "1e6"], None);
    let mhz: f64 = text.lines().find_map(|l| l.strip_prefix("a_in_g = ")).unwrap().parse().unwrap();
    assert!((mhz / g - 1e-3).abs() < 1e-12);

    let (_, text) = run(&["units", "--accel", "0"], None);
    assert!(text.contains("a_in_g = 0e0"));
}

#[test]
fn zero_duration_integrals_are_zero() {
    let cfg = format!(
        r#"{{{}, "trajectory": {{"kind": "inertial", "x0": 1.0, "duration": 0.0}}, "integrals": {{"with_m": true}}}}"#,
        cavity(PI, 2, 0.01)
    );
    let (out, text) = run(&["integrals"], Some(&cfg));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 2 * 2 + 2 * 4);
    for r in &rows {
        assert_eq!(r[3].parse::<f64>().unwrap(), 0.0);
        assert_eq!(r[4].parse::<f64>().unwrap(), 0.0);
    }
    assert!(rows.iter().any(|r| r[1] == "-+"));
}

#[test]
fn resonant_inertial_row_matches_closed_form() {
    let cfg = format!(
        r#"{{{}, "trajectory": {{"kind": "inertial", "x0": 1.0, "duration": 5.0}}}}"#,
        cavity(PI, 1, 0.01)
    );
    let (out, text) = run(&["integrals"], Some(&cfg));
    assert!(out.status.success());
    let rows = data_rows(&text);
    let minus = rows.iter().find(|r| r[1] == "-").unwrap();
    let re: f64 = minus[3].parse().unwrap();
    let im: f64 = minus[4].parse().unwrap();
    assert!((re - 5.0 * 1f64.sin()).abs() < 1e-9 && im.abs() < 1e-9);
    assert!(text.starts_with("# accelgates "));
    assert!(text.lines().nth(1).unwrap().starts_with("# config: {"));
}

#[test]
fn unknown_keys_exit_one_and_name_the_key() {
    let (out, _) = run(&["integrals"], Some(r#"{"cavity": {"length": 3.0, "n_modes": 1, "omega_gap": 1.0, "coupling": 0.01, "wobble": 2}}"#));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("wobble"));
}

#[test]
fn exhausted_budget_exits_two() {
    let cfg = format!(
        r#"{{{}, "trajectory": {{"kind": "inertial", "x0": 1.0, "duration": 50.0}}}}"#,
        cavity(PI, 1, 0.01)
    );
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(cfg.as_bytes()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_accelgates"))
        .args(["integrals", "--config"])
        .arg(f.path())
        .env("ACCELGATES_MAX_EVALS", "30")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

fn scan_config(parameter: &str, values: &str, trajectory: &str, length: f64) -> String {
    format!(
        r#"{{{}, "trajectory": {trajectory}, "field": {{"kind": "coherent", "mode": 1, "alpha_abs": 1.0}},
            "scan": {{"parameter": "{parameter}", "values": {values}}}}}"#,
        cavity(length, 1, 0.01)
    )
}

#[test]
fn single_point_scan_matches_library() {
    let cfg = scan_config("a", "[0.3]", r#"{"kind": "inertial", "x0": 1.0, "duration": 2.0}"#, PI);
    let (out, text) = run(&["scan"], Some(&cfg));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&text);
    let seg = TrajectorySegment::accelerated(0.3, 0.0, 2.0).unwrap();
    let c = CavityConfig::new(PI, 1, 1.0, 0.01).unwrap();
    let (i, _) = oscillatory::mode_integrals(&seg, &c, 1, 2.0, false, &QuadratureOptions::default()).unwrap();
    let r = extract_rotation(i.plus.value, i.minus.value, &CoherentPrep::from_polar(1, 1.0, 0.0), 0.01);
    let phi: f64 = rows[0][1].parse().unwrap();
    let delta: f64 = rows[0][3].parse().unwrap();
    assert!((phi - r.azimuth.to_degrees()).abs() < 1e-9);
    assert!((delta - r.angle).abs() < 1e-12 * r.angle.max(1.0) + 1e-15);
    assert!(text.contains("# phi_spread_deg="));
}

fn spread(text: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix("# phi_spread_deg="))
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn accelerated_time_scan_varies_more_than_inertial() {
    let l = 25.0 * PI;
    let times: Vec<String> = (0..=45).map(|k| format!("{}", 0.5 + 0.1 * k as f64)).collect();
    let values = format!("[{}]", times.join(","));
    let inertial = scan_config("T", &values, &format!(r#"{{"kind": "inertial", "x0": {}, "duration": 5.0}}"#, 0.5 * l), l);
    let accel = scan_config("T", &values, r#"{"kind": "uniform_acceleration", "acceleration": 1.0, "x0": 0.0, "duration": 5.0}"#, l);
    let (o1, t1) = run(&["scan"], Some(&inertial));
    let (o2, t2) = run(&["scan"], Some(&accel));
    assert!(o1.status.success() && o2.status.success());
    assert!(spread(&t2) > spread(&t1));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let cfg = scan_config("a", "[0.1, 0.5, 1.0, 1.5]", r#"{"kind": "inertial", "x0": 1.0, "duration": 2.0}"#, PI);
    let (_, a) = run(&["scan", "--jobs", "1"], Some(&cfg));
    let (_, b) = run(&["scan", "--jobs", "3"], Some(&cfg));
    assert_eq!(a, b);
}

#[test]
fn emit_config_applies_flag_overrides() {
    let (out, text) = run(&["integrals", "--emit-config", "--tol", "1e-7"], None);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["tolerances"]["tol"], 1e-7);
    assert!(v["cavity"]["length"].is_number());
}

fn synth_config(target: &str, a_max: f64) -> String {
    format!(
        r#"{{"synthesis": {{"target": {target},
            "constraints": {{"a_max": {a_max}, "t_max": 5.0, "coupling": 0.01, "alpha_max": 5.0, "max_segments": 100000}}}}}}"#
    )
}

#[test]
fn identity_target_gives_empty_plan() {
    let (out, text) = run(&["synthesize"], Some(&synth_config(r#"{"axis_angle": {"axis": [0, 0, 1], "angle": 0}}"#, 2.0)));
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["plan"]["segments"].as_array().unwrap().len(), 0);
    assert_eq!(v["plan"]["fidelity"], 1.0);
}

#[test]
fn infeasible_constraints_exit_three() {
    let (out, _) = run(&["synthesize"], Some(&synth_config(r#"{"axis_angle": {"axis": [0, 0, 1], "angle": 1}}"#, 0.0)));
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unitary_target_is_planned() {
    // Hadamard, up to phase
    let h = 1.0 / 2f64.sqrt();
    let target = format!(r#"{{"unitary": [[{h}, 0], [{h}, 0], [{h}, 0], [{}, 0]]}}"#, -h);
    let (out, text) = run(&["synthesize"], Some(&synth_config(&target, 2.0)));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["plan"]["fidelity"].as_f64().unwrap() >= 0.999);
    assert!(v["plan"]["segments"][0]["cavity_length"].is_number());
}

fn oracle_config(field: &str, coupling: f64, extra: &str) -> String {
    format!(
        r#"{{{}, "trajectory": {{"kind": "uniform_acceleration", "acceleration": 1.0, "x0": 0.0, "duration": 5.0}},
            "field": {field}{extra}}}"#,
        cavity(25.0 * PI, 1, coupling)
    )
}

#[test]
fn oracle_zero_coupling_passes() {
    let (out, text) = run(&["oracle-verify"], Some(&oracle_config(r#"{"kind": "vacuum"}"#, 0.0, "")));
    assert!(out.status.success(), "{text}");
}

#[test]
fn oracle_coherent_halving_passes() {
    let cfg = oracle_config(r#"{"kind": "coherent", "mode": 1, "alpha_abs": 1.0}"#, 1e-3, "");
    let (out, text) = run(&["oracle-verify"], Some(&cfg));
    assert!(out.status.success(), "{text}");
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let ratio = v["checks"][1]["report"]["ratio"].as_f64().unwrap();
    assert!((1.5..=2.5).contains(&ratio));
}

#[test]
fn oracle_vacuum_window_is_enforced() {
    // the vacuum residual falls by ≈ 16 per halving, outside the default window
    let base = oracle_config(r#"{"kind": "vacuum"}"#, 1e-2, "");
    let (out, text) = run(&["oracle-verify"], Some(&base));
    assert_eq!(out.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let ratio = v["checks"][1]["report"]["ratio"].as_f64().unwrap();
    assert!((12.0..20.0).contains(&ratio), "{ratio}");

    let widened = oracle_config(
        r#"{"kind": "vacuum"}"#,
        1e-2,
        r#", "oracle": {"n_max": 3, "bloch": [0, 0, -1], "solver": {"tol": 1e-13, "max_steps": 5000000},
             "coherent_window": [1.5, 2.5], "coherent_max_residual": 0.05, "vacuum_window": [12, 20],
             "ladder": [[1, 1], [1, 2], [1, 3]]}"#,
    );
    let (out, text) = run(&["oracle-verify"], Some(&widened));
    assert!(out.status.success(), "{text}");
}
