//! Command-line harness: reads an experiment configuration, runs its checks
//! with derived per-check seeds and writes CSV/JSON reports.

pub mod anchor;
pub mod checks;
pub mod config;
pub mod payoffs;
pub mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{ExperimentConfig, Family};
use crate::report::{csv_string, json_string, write_plots, Report};

/// Exit status when every check passes.
pub const EXIT_PASS: i32 = 0;
/// Exit status when at least one check fails.
pub const EXIT_FAIL: i32 = 1;
/// Exit status for an unusable configuration or command line.
pub const EXIT_INVALID: i32 = 2;

/// Environment variable overriding `--jobs`.
pub const JOBS_ENV: &str = "GSTOCH_JOBS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Upper expectations: G function, forced values, single payoffs.
    Expect,
    /// Axioms, conditional expectations, dynamic consistency.
    Conditional,
    /// Itô formula residuals and localization.
    ItoCheck,
    /// Itô integral identities and moment bounds.
    Bounds,
    /// Stopped integrals and grid approximation of stopping times.
    Stopping,
    /// Every configured check.
    Suite,
    /// Tree, PDE and Monte-Carlo oracles on a payoff panel.
    Compare,
}

impl Command {
    fn selects(self, family: Family) -> bool {
        match self {
            Self::Suite => true,
            Self::Expect => family == Family::Expect,
            Self::Conditional => family == Family::Conditional,
            Self::ItoCheck => family == Family::ItoCheck,
            Self::Bounds => family == Family::Bounds,
            Self::Stopping => family == Family::Stopping,
            Self::Compare => family == Family::Compare,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "gstoch",
    version,
    about = "Numerical checks of stochastic calculus under G-expectation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON experiment configuration; the default suite when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Both)]
    pub format: Format,
    /// Records each check's wall-clock time in the reports.
    #[arg(long, global = true)]
    pub timings: bool,
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, String> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| format!("cannot read {}: {e}", p.display()))?;
            ExperimentConfig::from_json(&text)
        }
    }
}

fn jobs(flag: Option<usize>) -> Result<Option<usize>, String> {
    match std::env::var(JOBS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| format!("{JOBS_ENV} must be a non-negative integer, got '{v}'")),
        Err(std::env::VarError::NotPresent) => Ok(flag),
        Err(e) => Err(format!("{JOBS_ENV}: {e}")),
    }
}

/// Runs the checks of `cfg` selected by `command`, in declaration order.
pub fn execute(cfg: &ExperimentConfig, command: Command, timings: bool) -> Result<Report, String> {
    let mut report = Report {
        seed: cfg.seed,
        ..Report::default()
    };
    for (index, spec) in cfg.checks.iter().enumerate() {
        if !command.selects(spec.family()) {
            continue;
        }
        let start = Instant::now();
        let (mut rows, plots) = checks::run_check(spec, cfg, checks::check_seed(cfg.seed, index))?;
        if timings {
            let secs = start.elapsed().as_secs_f64();
            rows.iter_mut().for_each(|r| r.runtime = Some(secs));
        }
        report.rows.extend(rows);
        report.plots.extend(plots);
    }
    Ok(report)
}

fn write_reports(report: &Report, cfg: &ExperimentConfig, format: Format) -> std::io::Result<()> {
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir)?;
    let stem = &cfg.output.stem;
    if matches!(format, Format::Csv | Format::Both) {
        std::fs::write(dir.join(format!("{stem}.csv")), csv_string(&report.rows)?)?;
    }
    if matches!(format, Format::Json | Format::Both) {
        std::fs::write(dir.join(format!("{stem}.json")), json_string(report)?)?;
    }
    if cfg.output.plot_data {
        write_plots(dir, &report.plots)?;
    }
    Ok(())
}

/// Parses `args` and runs the harness, returning the exit status.
pub fn run<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_PASS
            };
        }
    };
    let invalid = |msgs: &[String]| {
        for m in msgs {
            eprintln!("error: {m}");
        }
        EXIT_INVALID
    };
    let mut cfg = match load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => return invalid(&[e]),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = cli.out_dir {
        cfg.output.dir = d;
    }
    let errs = cfg.validate();
    if !errs.is_empty() {
        return invalid(&errs);
    }
    if !cfg.checks.iter().any(|c| cli.command.selects(c.family())) {
        return invalid(&["no configured check belongs to this subcommand".to_string()]);
    }
    let threads = match jobs(cli.jobs) {
        Ok(j) => j,
        Err(e) => return invalid(&[e]),
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => return invalid(&[format!("cannot start worker threads: {e}")]),
    };
    let report = match pool.install(|| execute(&cfg, cli.command, cli.timings)) {
        Ok(r) => r,
        Err(e) => return invalid(&[e]),
    };
    if let Err(e) = write_reports(&report, &cfg, cli.format) {
        eprintln!(
            "error: cannot write reports to {}: {e}",
            cfg.output.dir.display()
        );
        return EXIT_INVALID;
    }
    for r in &report.rows {
        println!("{} {}", if r.pass { "PASS" } else { "FAIL" }, r.check);
    }
    let failed: Vec<_> = report.failures().collect();
    if failed.is_empty() {
        return EXIT_PASS;
    }
    eprintln!("{} of {} checks failed:", failed.len(), report.rows.len());
    for r in failed {
        eprintln!(
            "  {} [{}] {} value {} target {} tolerance {}",
            r.check,
            r.anchor.label(),
            r.relation.name(),
            report::real(r.value),
            report::real(r.target),
            report::real(r.tolerance)
        );
    }
    EXIT_FAIL
}
