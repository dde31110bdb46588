//! The default suite at seed 42, replayed twice, graded against the
//! acceptance criteria. One PASS/FAIL line is printed per criterion.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::Command;

use gstoch_cli::config::{CheckSpec, ExperimentConfig};
use gstoch_core::formula::{AFFINE_CASES, CONVERGENCE_PANEL};
use tempfile::TempDir;

#[derive(Debug)]
struct Row {
    check: String,
    relation: String,
    value: f64,
    target: f64,
    tolerance: f64,
    pass: bool,
}

fn run_suite(dir: &Path) -> (Vec<Row>, Vec<u8>, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_gstoch"))
        .args(["suite", "--seed", "42", "--out-dir"])
        .arg(dir)
        .env_remove("GSTOCH_JOBS")
        .output()
        .unwrap();
    assert!(
        matches!(out.status.code(), Some(0 | 1)),
        "suite did not run: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv_bytes = fs::read(dir.join("report.csv")).unwrap();
    let json_bytes = fs::read(dir.join("report.json")).unwrap();
    let mut reader = csv::Reader::from_reader(csv_bytes.as_slice());
    let rows = reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            Row {
                check: r[0].to_string(),
                relation: r[2].to_string(),
                value: r[3].parse().unwrap(),
                target: r[4].parse().unwrap(),
                tolerance: r[5].parse().unwrap(),
                pass: &r[6] == "true",
            }
        })
        .collect();
    (rows, csv_bytes, json_bytes)
}

struct Grader<'a> {
    rows: &'a [Row],
    problems: Vec<String>,
}

impl<'a> Grader<'a> {
    fn new(rows: &'a [Row]) -> Self {
        Self {
            rows,
            problems: Vec::new(),
        }
    }

    fn expect(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.problems.push(what.into());
        }
    }

    /// Rows whose id starts with `prefix`; each must pass with a tolerance
    /// no looser than `max_tol`.
    fn rows(&mut self, prefix: &str, max_tol: f64) -> Vec<&'a Row> {
        let found: Vec<&Row> = self
            .rows
            .iter()
            .filter(|r| r.check.starts_with(prefix))
            .collect();
        self.expect(!found.is_empty(), format!("no rows for {prefix}"));
        for r in &found {
            self.expect(
                r.pass,
                format!("{} failed: value {} target {}", r.check, r.value, r.target),
            );
            self.expect(
                r.tolerance <= max_tol,
                format!("{} tolerance {} exceeds {max_tol}", r.check, r.tolerance),
            );
        }
        found
    }

    fn report(self, n: usize, title: &str) -> bool {
        let ok = self.problems.is_empty();
        println!(
            "{} criterion {n}: {title}",
            if ok { "PASS" } else { "FAIL" }
        );
        for p in &self.problems {
            println!("    {p}");
        }
        ok
    }
}

fn default_spec(kind: &str) -> CheckSpec {
    ExperimentConfig::default()
        .checks
        .into_iter()
        .find(|c| c.kind() == kind)
        .unwrap()
}

fn forced_values(rows: &[Row]) -> bool {
    let mut g = Grader::new(rows);
    for (payoff, target) in [("square", 1.0), ("neg_square", -0.25)] {
        for (oracle, tol) in [("tree", 1e-9), ("pde", 1e-3), ("mc", 0.02)] {
            let found = g.rows(&format!("forced_value.{payoff}.{oracle}"), tol);
            for r in found {
                g.expect(
                    r.target == target,
                    format!("{} target {}", r.check, r.target),
                );
            }
        }
    }
    g.report(1, "forced values of squared Brownian motion")
}

fn cross_oracle(rows: &[Row]) -> bool {
    let mut g = Grader::new(rows);
    let pairs = g.rows("compare.", f64::INFINITY);
    let tree_pde: Vec<_> = pairs
        .iter()
        .filter(|r| r.check.ends_with(".tree_pde"))
        .collect();
    let payoffs: BTreeSet<&str> = tree_pde
        .iter()
        .map(|r| r.check.split('.').nth(1).unwrap())
        .collect();
    g.expect(
        payoffs.len() >= 8,
        format!("panel has {} payoffs", payoffs.len()),
    );
    g.expect(
        payoffs.iter().any(|p| p.starts_with("two_time")),
        "no two-time payoff",
    );
    for r in tree_pde {
        g.expect(
            r.tolerance <= 5e-3,
            format!("{} tolerance {}", r.check, r.tolerance),
        );
    }
    for p in &payoffs {
        let mc = pairs
            .iter()
            .filter(|r| r.check.starts_with(&format!("compare.{p}.mc.")))
            .count();
        g.expect(mc >= 3, format!("{p} has {mc} Monte-Carlo rows"));
    }
    for r in pairs.iter().filter(|r| r.check.contains(".mc.")) {
        g.expect(
            r.relation == "at_most",
            format!("{} relation {}", r.check, r.relation),
        );
    }
    g.report(2, "cross-oracle agreement and Monte-Carlo domination")
}

fn axioms(rows: &[Row]) -> bool {
    let mut g = Grader::new(rows);
    g.expect(
        matches!(default_spec("axioms"), CheckSpec::Axioms { instances, .. } if instances >= 100),
        "fewer than 100 instances",
    );
    let a = g.rows("axioms.", 1e-9).len();
    let c = g.rows("conditional.", 1e-9);
    g.expect(a == 4, format!("{a} axiom rows"));
    g.expect(c.len() >= 7, format!("{} conditional rows", c.len()));
    g.expect(
        c.iter().any(|r| r.check == "conditional.tower"),
        "no tower row",
    );
    g.report(3, "sublinear expectation axioms and conditional properties")
}

fn dynamic_consistency(rows: &[Row]) -> bool {
    let mut g = Grader::new(rows);
    g.expect(
        matches!(default_spec("dynamic_consistency"), CheckSpec::DynamicConsistency { instances, .. } if instances >= 100),
        "fewer than 100 instances",
    );
    g.rows("dynamic_consistency.direct_vs_iterated", 1e-9);
    g.report(4, "direct and iterated conditional expectations agree")
}

fn ito_identities(rows: &[Row]) -> bool {
    let mut g = Grader::new(rows);
    g.expect(
        matches!(
            default_spec("ito_identities"),
            CheckSpec::ItoIdentities { depth: 5, .. }
        ),
        "tree depth is not 5",
    );
    for name in [
        "zero_mean",
        "isometry_bound",
        "isometry_equality",
        "squared_increment",
        "qv_bound",
        "moment_bound_time",
        "moment_bound_qv",
    ] {
        g.rows(&format!("ito.{name}.tree"), 1e-9);
    }
    let mc = g.rows("ito.zero_mean.mc.", f64::INFINITY);
    g.expect(mc.len() >= 3, "zero mean needs every control");
    g.report(5, "Ito integral identities and bounds")
}

fn stopping(rows: &[Row]) -> bool {
    let mut g = Grader::new(rows);
    let cfg = ExperimentConfig::default();
    g.expect(cfg.paths >= 10_000, format!("{} paths", cfg.paths));
    let ids = g.rows("stopping.stopped_identity.", 1e-15);
    g.expect(ids.len() == 3, format!("{} stopping rules", ids.len()));
    let dec = g.rows("stopping.truncation_norm.decrease.", 0.0);
    g.expect(dec.len() == 4, format!("{} refinements", dec.len()));
    let last = g.rows("stopping.truncation_norm.final", 1e-2);
    g.expect(
        last.iter().all(|r| r.value < 1e-2),
        "final norm not below 1e-2",
    );
    g.report(
        6,
        "stopped integrals and grid approximation of stopping times",
    )
}

fn ito_formula(rows: &[Row]) -> bool {
    let mut g = Grader::new(rows);
    let all = g.rows("ito_formula.", f64::INFINITY);
    let cases: BTreeSet<&str> = all
        .iter()
        .filter(|r| r.check.ends_with(".order"))
        .map(|r| r.check.split('.').nth(1).unwrap())
        .collect();
    g.expect(
        cases.len() >= 6,
        format!("{} non-affine cases", cases.len()),
    );
    for case in CONVERGENCE_PANEL {
        let orders: Vec<_> = all
            .iter()
            .filter(|r| {
                r.check.starts_with(&format!("ito_formula.{case}.")) && r.check.ends_with(".order")
            })
            .collect();
        g.expect(
            orders.len() == 4,
            format!("{case} has {} controls", orders.len()),
        );
        for r in orders {
            g.expect(
                r.target >= 0.4,
                format!("{} order target {}", r.check, r.target),
            );
        }
    }
    g.expect(
        matches!(default_spec("ito_formula"), CheckSpec::ItoFormula { ref mesh_steps, .. } if mesh_steps.len() == 5),
        "not four halvings",
    );
    for case in AFFINE_CASES {
        let rows = g.rows(&format!("ito_formula.{case}."), 1e-12);
        g.expect(
            rows.iter().all(|r| r.check.ends_with(".max_residual")),
            "affine rows",
        );
    }
    g.rows("localization.", 1e-12);
    g.report(7, "Ito formula residual convergence and localization")
}

fn main() {
    let first = TempDir::new().unwrap();
    let second = TempDir::new().unwrap();
    let (rows, csv_a, json_a) = run_suite(first.path());
    let (_, csv_b, json_b) = run_suite(second.path());

    let mut results = vec![
        forced_values(&rows),
        cross_oracle(&rows),
        axioms(&rows),
        dynamic_consistency(&rows),
        ito_identities(&rows),
        stopping(&rows),
        ito_formula(&rows),
    ];
    let mut g = Grader::new(&rows);
    g.expect(csv_a == csv_b, "CSV reports differ");
    g.expect(json_a == json_b, "JSON reports differ");
    results.push(g.report(8, "replay determinism"));

    let failing: Vec<_> = rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.check.as_str())
        .collect();
    assert!(failing.is_empty(), "failing rows: {failing:?}");
    assert!(results.iter().all(|&ok| ok));
}
