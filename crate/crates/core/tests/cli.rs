use std::process::Command;

use adiabatic_swap::cli::{scan_cmd, simulate_cmd, InitialState, RunConfig};
use adiabatic_swap::gateanalysis::{gate_fidelity, AxisSpec, ScanAxis};
use adiabatic_swap::propagator::GateMatrix;
use adiabatic_swap::Error;

const BIN: &str = env!("CARGO_BIN_EXE_adiabatic-swap");

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn defaults_are_the_reference_parameters() {
    let c = RunConfig::default();
    assert_eq!(c.physics.omega_max_tp, 10.0);
    assert_eq!((c.physics.g1_tp, c.physics.g2_tp), (25.0, 25.0));
    assert_eq!(c.physics.intra_delay, 1.2);
    assert_eq!(RunConfig::from_json("{}").unwrap(), c);
}

#[test]
fn unknown_field_is_reported_with_position() {
    let err = RunConfig::from_json("{\n  \"physics\": {\n    \"omega\": 3\n  }\n}").unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, Error::Config(_)));
    assert!(msg.contains("omega") && msg.contains("line 3"), "{msg}");
}

#[test]
fn swap_trajectories_and_round_trip() {
    let cfg = RunConfig::default();
    let out = simulate_cmd(&cfg).unwrap();
    let p10 = column(&out.csv, "P(10;0)");
    assert!(*p10.last().unwrap() >= 0.99);
    assert!(out.csv.lines().next().unwrap().starts_with("t/Tp,"));

    // echoed config parses back to the same value
    let json = serde_json::to_string_pretty(&out.report).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let echoed = RunConfig::from_json(&v["config"].to_string()).unwrap();
    assert_eq!(echoed, cfg);
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));

    // same config, same bytes
    assert_eq!(simulate_cmd(&cfg).unwrap().csv, out.csv);
}

#[test]
fn doubly_occupied_state_stays_put() {
    let cfg = RunConfig { initial_state: InitialState::Label("11;0".into()), ..Default::default() };
    let out = simulate_cmd(&cfg).unwrap();
    assert!(column(&out.csv, "P(11;0)").iter().all(|&p| p >= 0.999));
}

#[test]
fn no_drive_is_identity() {
    let mut cfg = RunConfig::default();
    cfg.physics.omega_max_tp = 0.0;
    let out = simulate_cmd(&cfg).unwrap();
    assert!(column(&out.csv, "P(01;0)").iter().all(|&p| (p - 1.0).abs() <= 1e-12));
    let f = gate_fidelity(&out.report.gate.gate, &GateMatrix::identity());
    assert!((f.fidelity - 1.0).abs() <= 1e-12);
}

#[test]
fn scan_shapes() {
    let mut cfg = RunConfig::default();
    assert_eq!(scan_cmd(&cfg).unwrap().lines().count(), 1);

    // weaker cavity allows a coarser step; only the bookkeeping is checked
    cfg.physics.g1_tp = 12.0;
    cfg.physics.g2_tp = 12.0;
    cfg.scan = vec![
        AxisSpec { axis: ScanAxis::OmegaMax, values: vec![4.0, 5.0, 6.0, 7.0, 8.0] },
        AxisSpec { axis: ScanAxis::IntraDelay, values: vec![1.0, 1.1, 1.2, 1.3, 1.4] },
    ];
    let csv = scan_cmd(&cfg).unwrap();
    assert_eq!(csv.lines().count(), 26);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",ok")));
    assert_eq!(scan_cmd(&cfg).unwrap(), csv);
}

#[test]
fn fidelity_improves_with_pulse_area() {
    let mut cfg = RunConfig::default();
    cfg.scan = vec![AxisSpec { axis: ScanAxis::OmegaMax, values: vec![2.0, 5.0, 10.0, 20.0] }];
    let f = column(&scan_cmd(&cfg).unwrap(), "fidelity");
    assert!(f[0] < 0.9, "{f:?}");
    assert!(f[0] <= f[1] && f[1] <= f[2], "{f:?}");
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\"protocl\": \"swap8\"}").unwrap();
    let st = Command::new(BIN).args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).status().unwrap();
    assert_eq!(st.code(), Some(2));

    let weak = dir.path().join("weak.json");
    std::fs::write(&weak, "{\"physics\": {\"omega_max_tp\": 2}}").unwrap();
    let run = |extra: &[&str]| {
        Command::new(BIN)
            .args(["simulate", "--config"])
            .arg(&weak)
            .arg("--out")
            .arg(dir.path())
            .args(extra)
            .status()
            .unwrap()
            .code()
    };
    assert_eq!(run(&[]), Some(0));
    assert_eq!(run(&["--assert"]), Some(4));
    assert!(dir.path().join("trajectory.csv").exists());
    assert!(dir.path().join("report.json").exists());

    let out = Command::new(BIN).args(["estimate", "--intensity", "1e4", "--tp", "1e-9"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["omega_tp"].as_f64().unwrap() - 10.0).abs() < 1e-9);
}
