use std::f64::consts::TAU;
use std::fs;
use std::process::Command;

use gravicav::cli::{
    evaluate, parse_config, run, ConfigError, RunOptions, ScenarioKind, Status, VACUUM_HEADER,
};

const CONFIG: &str = r#"{
  "scenarios": [
    {"name": "vacuum", "kind": "VacuumSqueezing", "params": {"alpha": 1.0, "D": 1.0},
     "time_grid": {"start": 0.0, "end": 12.566370614359172, "samples": 2001}, "output": "out/vacuum"},
    {"name": "thermal", "kind": "ThermalCheck", "output": "out/thermal"},
    {"name": "oracle", "kind": "OracleVerify", "params": {"opticalDim": 20, "gwDim": 12, "q": 0.05},
     "time_grid": {"start": 0.0, "end": 6.283185307179586, "samples": 9}, "output": "out/oracle"}
  ]
}"#;

fn read_csv(path: &std::path::Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().take(9).map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn config_round_trip() {
    let scenarios = parse_config(CONFIG).unwrap();
    assert_eq!(scenarios.len(), 3);
    assert!(matches!(scenarios[0].kind, ScenarioKind::VacuumSqueezing(_)));
    assert_eq!(scenarios[0].time_grid.samples, 2001);
    assert!(parse_config("").unwrap().is_empty());
    assert!(matches!(parse_config("{\"scenarios\": [").unwrap_err(), ConfigError::Parse { .. }));
    let bad = r#"[{"name": "x", "kind": "CoherentGw", "params": {"q": 1.5}}]"#;
    assert!(matches!(parse_config(bad).unwrap_err(), ConfigError::Validation { .. }));
}

#[test]
fn vacuum_csv_has_minimum_and_revival() {
    let dir = tempfile::tempdir().unwrap();
    let scenarios = parse_config(CONFIG).unwrap();
    let opts = RunOptions { out_dir: dir.path().into(), ..RunOptions::default() };
    let summary = run(&scenarios[0], &opts).unwrap();
    assert_eq!(summary.status, Status::Pass, "{summary:?}");

    let (header, rows) = read_csv(&dir.path().join("out/vacuum.csv"));
    assert_eq!(header, VACUUM_HEADER);
    assert_eq!(rows.len(), 2001);
    let min = rows.iter().take_while(|r| r[1] < TAU).min_by(|a, b| a[3].total_cmp(&b[3])).unwrap();
    assert!((min[1] - 0.33).abs() <= 0.02, "F0 = {}", min[1]);
    assert!((min[3] - 0.68).abs() <= 0.01, "var = {}", min[3]);
    let revival = rows.iter().find(|r| (r[1] - TAU).abs() < 1e-9).expect("grid hits 2π");
    assert!((revival[3] - 1.0).abs() <= 1e-9);
    assert!(rows.iter().all(|r| r[3] >= 0.0));

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/vacuum.summary.json")).unwrap()).unwrap();
    assert_eq!(json["status"], "pass");
    assert!((json["metrics"]["F0"].as_f64().unwrap() - 0.3307).abs() < 1e-3);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let scenarios = parse_config(CONFIG).unwrap();
    let mut contents = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions { out_dir: dir.path().into(), ..RunOptions::default() };
        for s in &scenarios {
            assert!(!run(s, &opts).unwrap().status.is_failure());
        }
        contents.push((
            fs::read(dir.path().join("out/vacuum.csv")).unwrap(),
            fs::read(dir.path().join("out/oracle.csv")).unwrap(),
        ));
        assert!(dir.path().join("out/thermal.summary.json").exists());
        assert!(!dir.path().join("out/thermal.csv").exists());
    }
    assert_eq!(contents[0], contents[1]);
}

#[test]
fn oracle_scenario_agrees_with_closed_form() {
    let scenarios = parse_config(CONFIG).unwrap();
    let out = evaluate(&scenarios[2], &RunOptions { write_files: false, ..RunOptions::default() });
    assert_eq!(out.summary.status, Status::Pass, "{:?}", out.summary);
    assert_eq!(out.rows.len(), 9);
    for row in &out.rows {
        let o = row.oracle.as_ref().unwrap();
        assert!(o.abs_dev <= 1e-6, "{o:?}");
        assert!(!o.tail_flagged);
    }
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_gravicav");
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    let out = Command::new(bin).arg("simulate").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    let good = dir.path().join("good.json");
    fs::write(&good, r#"[{"name": "v", "kind": "VacuumSqueezing", "output": "v"}]"#).unwrap();
    let status = Command::new(bin)
        .args(["simulate", good.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(dir.path().join("v.csv").exists());

    let out = Command::new(bin)
        .args(["sweep-variance", "--samples", "5", "--fmax", "1.0"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.starts_with("t,F,mean_quadrature,variance,D"));
}
