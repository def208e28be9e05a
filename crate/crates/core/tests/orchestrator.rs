use std::collections::BTreeMap;
use std::path::Path;

use atomwalk_core::orchestrator::{
    load_config, read_scan_times, run, Command, ConfigError, Overrides, RunConfig, RunError,
    RunManifest, MANIFEST_NAME,
};
use atomwalk_core::scattering::{exit_time, ScanAxis, ScanSpec};
use sha2::{Digest, Sha256};

fn overrides(command: Command, out: &Path) -> Overrides {
    Overrides {
        command: Some(command),
        out: Some(out.to_path_buf()),
        workers: Some(1),
        ..Default::default()
    }
}

fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn digests(m: &RunManifest) -> BTreeMap<String, String> {
    m.outputs
        .iter()
        .map(|f| (f.name.clone(), f.sha256.clone()))
        .collect()
}

#[test]
fn empty_file_means_built_in_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "c.toml", "");
    let cfg = load_config(Some(&path), &overrides(Command::Trajectory, dir.path())).unwrap();
    assert_eq!(cfg.params.omega_r, 1e-3);
    assert_eq!(cfg.params.kappa, 0.01);
    assert_eq!(cfg.params.delta, 0.15);
    assert_eq!((cfg.initial.x, cfg.initial.p), (0.0, 10.0));
    assert_eq!(
        (cfg.initial.u, cfg.initial.v, cfg.initial.z),
        (0.0, 0.0, -1.0)
    );
}

#[test]
fn negative_recoil_is_rejected_by_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "c.toml", "[params]\nomega_r = -1\n");
    match load_config(Some(&path), &overrides(Command::Trajectory, dir.path())) {
        Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "params.omega_r"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn delta_flag_beats_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "c.toml", "[params]\ndelta = 0.15\n");
    let o = Overrides {
        delta: Some(1.0),
        ..overrides(Command::Trajectory, dir.path())
    };
    assert_eq!(load_config(Some(&path), &o).unwrap().params.delta, 1.0);
}

#[test]
fn typo_is_a_parse_error_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "c.toml",
        "[scan]\nn = 4\nlo = 0.1\nhigh = 0.2\n",
    );
    match load_config(Some(&path), &overrides(Command::Scan, dir.path())) {
        Err(ConfigError::Parse { line, message, .. }) => {
            assert_eq!(line, 4);
            assert!(message.contains("high"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn trajectory_run_writes_listed_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load_config(None, &overrides(Command::Trajectory, dir.path())).unwrap();
    let m = run(&cfg).unwrap();
    let names: Vec<&str> = m.outputs.iter().map(|f| f.name.as_str()).collect();
    assert_eq!(
        names,
        ["trajectory.csv", "events.csv", "trajectory_summary.json"]
    );
    for f in &m.outputs {
        let bytes = std::fs::read(dir.path().join(&f.name)).unwrap();
        assert_eq!(hex_digest(&bytes), f.sha256);
        assert_eq!(bytes.len() as u64, f.bytes);
    }
    let text = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("tau,x,p,u,v,z"));
    assert_eq!(lines.next(), Some("0,0,10,0,0,-1"));
    assert_eq!(text.lines().count(), 10_002);
    let events = std::fs::read_to_string(dir.path().join("events.csv")).unwrap();
    assert!(events.starts_with("tau,kind,x,p,u,v,z\n"));
    assert!(events.contains(",NodeCrossing,"));
    let manifest: RunManifest =
        serde_json::from_slice(&std::fs::read(dir.path().join(MANIFEST_NAME)).unwrap()).unwrap();
    assert_eq!(manifest.outputs, m.outputs);
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[test]
fn bloch_run_has_bloch_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = Overrides {
        t_max: Some(50.0),
        ..overrides(Command::Bloch, dir.path())
    };
    run(&load_config(None, &o).unwrap()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("bloch.csv")).unwrap();
    assert!(text.starts_with("tau,u,v,z\n0,0,0,-1\n"));
}

#[test]
fn two_point_scan_matches_direct_calls() {
    let dir = tempfile::tempdir().unwrap();
    let o = Overrides {
        n: Some(2),
        interval: Some((0.9, 1.1)),
        ..overrides(Command::Scan, dir.path())
    };
    run(&load_config(None, &o).unwrap()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    let spec = ScanSpec::new(ScanAxis::Detuning, 0.9, 1.1, 2);
    let expected = format!(
        "axis_value,outcome_kind,T\n0.9,exit,{}\n1.1,exit,{}\n",
        exit_time(&spec, 0.9).time(),
        exit_time(&spec, 1.1).time()
    );
    assert_eq!(text, expected);
    assert_eq!(
        read_scan_times(&dir.path().join("scan.csv")).unwrap().len(),
        2
    );
}

fn data_digests(cfg: &RunConfig, workers: usize, out: &Path) -> BTreeMap<String, String> {
    let cfg = RunConfig {
        workers: Some(workers),
        out: out.to_path_buf(),
        ..cfg.clone()
    };
    digests(&run(&cfg).unwrap())
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig {
        command: Some(Command::Scan),
        ..Default::default()
    };
    cfg.scan.n = 24;
    cfg.scan.t_max = 5000.0;
    let a = data_digests(&cfg, 1, &dir.path().join("a"));
    let b = data_digests(&cfg, 8, &dir.path().join("b"));
    assert_eq!(a, b);
    cfg.command = Some(Command::LyapunovMap);
    cfg.lyapunov_map.delta = atomwalk_core::lyapunov::AxisGrid::new(-0.5, 0.5, 3);
    cfg.lyapunov_map.kappa = atomwalk_core::lyapunov::AxisGrid::new(0.0, 0.1, 2);
    cfg.lyapunov_map.horizon = 200.0;
    let a = data_digests(&cfg, 1, &dir.path().join("c"));
    let b = data_digests(&cfg, 8, &dir.path().join("d"));
    assert_eq!(a, b);
    assert!(a.contains_key("ftle_map.csv"));
}

#[test]
fn pdf_from_existing_scan_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::from("axis_value,outcome_kind,T\n");
    // Pareto quantiles
    for i in 0..5000 {
        let q = 1.0 - (i as f64 + 0.5) / 5000.0;
        body.push_str(&format!("{},exit,{}\n", i, 100.0 * q.powf(-1.0 / 1.5)));
    }
    body.push_str("5000,timeout,NaN\n5001,immediate_exit,0\n");
    let input = write(dir.path(), "scan.csv", &body);
    let o = Overrides {
        input: Some(input),
        bins: Some((5000, Some(30))),
        out: Some(dir.path().join("out")),
        ..overrides(Command::Pdf, dir.path())
    };
    let m = run(&load_config(None, &o).unwrap()).unwrap();
    let names: Vec<&str> = m.outputs.iter().map(|f| f.name.as_str()).collect();
    assert_eq!(
        names,
        [
            "pdf_linear.csv",
            "pdf_log.csv",
            "fit_exponential.json",
            "fit_powerlaw.json",
            "pdf.json"
        ]
    );
    let fit: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/fit_powerlaw.json")).unwrap())
            .unwrap();
    assert_eq!(fit["model"], "PowerLawTail");
    assert!(fit["window"].is_array() && fit["point_count"].as_u64().unwrap() >= 5);
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/pdf.json")).unwrap()).unwrap();
    assert_eq!(summary["timeout_count"], 1);
    assert_eq!(summary["sample_count"], 5001);
    assert!((summary["gamma"].as_f64().unwrap() + 2.5).abs() < 0.2);
}

#[test]
fn errors_carry_a_kind() {
    let dir = tempfile::tempdir().unwrap();
    let o = Overrides {
        input: Some(dir.path().join("missing.csv")),
        ..overrides(Command::Pdf, dir.path())
    };
    let err = run(&load_config(None, &o).unwrap()).unwrap_err();
    assert!(matches!(err, RunError::Input { .. }));
    assert_eq!(err.to_json()["error"], "input-error");
}
