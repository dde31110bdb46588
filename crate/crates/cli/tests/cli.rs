use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn gstoch(dir: &Path, config: &str, args: &[&str], env: &[(&str, &str)]) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gstoch"));
    cmd.args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.join("out"))
        .env_remove("GSTOCH_JOBS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn csv_rows(dir: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(dir.join("out/report.csv")).unwrap();
    r.records().map(|x| x.unwrap()).collect()
}

#[test]
fn g_function_only_gives_three_passing_rows() {
    let dir = TempDir::new().unwrap();
    let out = gstoch(
        dir.path(),
        r#"{"checks": [{"kind": "g_function"}]}"#,
        &["suite"],
        &[],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv_rows(dir.path());
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| &r[6] == "true"));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap())
            .unwrap();
    assert_eq!(json["total"], 3);
    assert_eq!(json["failed"], 0);
    assert_eq!(json["rows"][0]["anchor"], "G function");
}

#[test]
fn zero_tolerance_on_monte_carlo_fails_with_status_one() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"tolerances": {"mc_relative": 0.0}, "checks": [{"kind": "forced_value", "paths": 2000}]}"#;
    let out = gstoch(dir.path(), cfg, &["expect"], &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("forced_value.square.mc"), "{err}");
    assert!(!err.contains("forced_value.square.tree"), "{err}");
}

#[test]
fn invalid_configurations_exit_with_status_two() {
    let cases = [
        r#"{"tolerances": {"tree": -1.0}}"#,
        r#"{"checks": [{"kind": "g_function", "bogus": 1}]}"#,
        r#"{"checks": [{"kind": "expect", "payoff": "no_such_payoff", "target": 1.0}]}"#,
        r#"{"checks": [{"kind": "ito_formula", "cases": ["no_such_case"]}]}"#,
        r#"{"checks": []}"#,
        r#"{"paths": 1}"#,
        "not json",
    ];
    for cfg in cases {
        let dir = TempDir::new().unwrap();
        let out = gstoch(dir.path(), cfg, &["suite"], &[]);
        assert_eq!(out.status.code(), Some(2), "{cfg}");
        assert!(!out.stderr.is_empty());
        assert!(!dir.path().join("out").exists());
    }
}

#[test]
fn subcommand_without_matching_checks_is_invalid() {
    let dir = TempDir::new().unwrap();
    let out = gstoch(
        dir.path(),
        r#"{"checks": [{"kind": "g_function"}]}"#,
        &["stopping"],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_jobs_variable_is_invalid() {
    let dir = TempDir::new().unwrap();
    let out = gstoch(
        dir.path(),
        r#"{"checks": [{"kind": "g_function"}]}"#,
        &["suite"],
        &[("GSTOCH_JOBS", "many")],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_count_does_not_change_reports() {
    let cfg = r#"{"paths": 2000, "checks": [{"kind": "ito_identities", "instances": 4}, {"kind": "expect", "payoff": "square", "target": 1.0}]}"#;
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let c = TempDir::new().unwrap();
    let oa = gstoch(a.path(), cfg, &["suite", "--jobs", "1"], &[]);
    let ob = gstoch(
        b.path(),
        cfg,
        &["suite", "--jobs", "1"],
        &[("GSTOCH_JOBS", "4")],
    );
    let oc = gstoch(c.path(), cfg, &["suite", "--seed", "7"], &[]);
    assert!(
        oa.status.code().is_some_and(|c| c <= 1),
        "{}",
        String::from_utf8_lossy(&oa.stderr)
    );
    assert_eq!(oa.status.code(), ob.status.code());
    assert_eq!(oa.stdout, ob.stdout);
    for f in ["report.csv", "report.json"] {
        let x = fs::read(a.path().join("out").join(f)).unwrap();
        let y = fs::read(b.path().join("out").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    assert!(oc.status.code().is_some_and(|c| c <= 1));
    let x = fs::read(a.path().join("out/report.csv")).unwrap();
    let z = fs::read(c.path().join("out/report.csv")).unwrap();
    assert_ne!(x, z);
}

#[test]
fn format_selects_report_files() {
    let dir = TempDir::new().unwrap();
    let out = gstoch(
        dir.path(),
        r#"{"checks": [{"kind": "g_function"}]}"#,
        &["expect", "--format", "json"],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("out/report.json").exists());
    assert!(!dir.path().join("out/report.csv").exists());
}

#[test]
fn timings_fill_the_runtime_column() {
    let dir = TempDir::new().unwrap();
    let out = gstoch(
        dir.path(),
        r#"{"checks": [{"kind": "g_function"}]}"#,
        &["suite", "--timings"],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(dir.path());
    assert!(rows
        .iter()
        .all(|r| r[7].parse::<f64>().is_ok_and(|t| t >= 0.0)));
    let dir = TempDir::new().unwrap();
    gstoch(
        dir.path(),
        r#"{"checks": [{"kind": "g_function"}]}"#,
        &["suite"],
        &[],
    );
    assert!(csv_rows(dir.path()).iter().all(|r| r[7].is_empty()));
}

#[test]
fn plot_files_are_two_columns() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"paths": 200, "checks": [{"kind": "ito_formula", "cases": ["square_bm"], "mesh_steps": [8, 16, 32]}]}"#;
    let out = gstoch(dir.path(), cfg, &["ito-check"], &[]);
    assert!(out.status.code().is_some_and(|c| c <= 1));
    let text = fs::read_to_string(
        dir.path()
            .join("out/plots/ito_formula_square_bm_sigma_hi.dat"),
    )
    .unwrap();
    assert_eq!(text.lines().count(), 3);
    for line in text.lines() {
        let cols: Vec<f64> = line
            .split_whitespace()
            .map(|c| c.parse().unwrap())
            .collect();
        assert_eq!(cols.len(), 2);
    }
}
