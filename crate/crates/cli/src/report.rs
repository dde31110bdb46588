//! Report rows and the CSV, JSON and plot-data writers.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::anchor::Anchor;

/// How `value` is compared with `target` under `tolerance`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `|value - target| <= tolerance`.
    AbsDiff,
    /// `|value - target| <= tolerance * |target|`.
    RelDiff,
    /// `value <= target + tolerance`.
    AtMost,
    /// `value >= target - tolerance`.
    AtLeast,
}

impl Relation {
    pub fn name(self) -> &'static str {
        match self {
            Self::AbsDiff => "abs_diff",
            Self::RelDiff => "rel_diff",
            Self::AtMost => "at_most",
            Self::AtLeast => "at_least",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        [Self::AbsDiff, Self::RelDiff, Self::AtMost, Self::AtLeast]
            .into_iter()
            .find(|r| r.name() == name)
    }

    /// False whenever an operand is NaN.
    pub fn holds(self, value: f64, target: f64, tolerance: f64) -> bool {
        match self {
            Self::AbsDiff => (value - target).abs() <= tolerance,
            Self::RelDiff => (value - target).abs() <= tolerance * target.abs(),
            Self::AtMost => value <= target + tolerance,
            Self::AtLeast => value >= target - tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub check: String,
    pub anchor: Anchor,
    pub relation: Relation,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Wall-clock seconds of the producing check, recorded on request.
    pub runtime: Option<f64>,
    pub seed: u64,
}

impl ReportRow {
    pub fn new(
        check: impl Into<String>,
        anchor: Anchor,
        relation: Relation,
        value: f64,
        target: f64,
        tolerance: f64,
        seed: u64,
    ) -> Self {
        Self {
            check: check.into(),
            anchor,
            relation,
            value,
            target,
            tolerance,
            pass: relation.holds(value, target, tolerance),
            runtime: None,
            seed,
        }
    }
}

/// Two-column series written as one whitespace-separated file.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub seed: u64,
    pub rows: Vec<ReportRow>,
    pub plots: Vec<PlotData>,
}

impl Report {
    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Seventeen significant digits.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub const CSV_HEADER: [&str; 9] = [
    "check",
    "anchor",
    "relation",
    "value",
    "target",
    "tolerance",
    "pass",
    "runtime_s",
    "seed",
];

pub fn csv_string(rows: &[ReportRow]) -> io::Result<String> {
    let mut w = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Necessary)
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.check.clone(),
            r.anchor.label().to_string(),
            r.relation.name().to_string(),
            real(r.value),
            real(r.target),
            real(r.tolerance),
            r.pass.to_string(),
            r.runtime.map(real).unwrap_or_default(),
            r.seed.to_string(),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| io::Error::other(e.to_string()))?;
    String::from_utf8(bytes).map_err(io::Error::other)
}

#[derive(Serialize)]
struct JsonReport<'a> {
    seed: u64,
    total: usize,
    failed: usize,
    rows: &'a [ReportRow],
}

pub fn json_string(report: &Report) -> io::Result<String> {
    let doc = JsonReport {
        seed: report.seed,
        total: report.rows.len(),
        failed: report.failures().count(),
        rows: &report.rows,
    };
    let mut s = serde_json::to_string_pretty(&doc).map_err(io::Error::other)?;
    s.push('\n');
    Ok(s)
}

pub fn plot_string(plot: &PlotData) -> String {
    plot.points
        .iter()
        .map(|&(x, y)| format!("{} {}\n", real(x), real(y)))
        .collect()
}

pub fn write_plots(dir: &Path, plots: &[PlotData]) -> io::Result<()> {
    if plots.is_empty() {
        return Ok(());
    }
    let dir = dir.join("plots");
    fs::create_dir_all(&dir)?;
    for p in plots {
        fs::write(dir.join(format!("{}.dat", p.name)), plot_string(p))?;
    }
    Ok(())
}
