//! JSON experiment configuration.

use std::path::PathBuf;

use gstoch_core::formula::{builtin_case, AFFINE_CASES, CASE_NAMES, CONVERGENCE_PANEL};
use gstoch_core::sublinear::{Partition, UncertaintySet};
use serde::{Deserialize, Serialize};

use crate::payoffs::{Payoff, PayoffRef, COMPARE_PANEL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum UncertaintySpec {
    Interval { sigma_lo: f64, sigma_hi: f64 },
    Covariances { theta: Vec<[[f64; 2]; 2]> },
}

impl Default for UncertaintySpec {
    fn default() -> Self {
        Self::Interval {
            sigma_lo: 0.5,
            sigma_hi: 1.0,
        }
    }
}

impl UncertaintySpec {
    pub fn build(&self) -> Result<UncertaintySet<f64>, String> {
        match self {
            Self::Interval { sigma_lo, sigma_hi } => UncertaintySet::interval(*sigma_lo, *sigma_hi),
            Self::Covariances { theta } => UncertaintySet::covariances(theta.clone()),
        }
        .map_err(|e| format!("uncertainty: {e}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum PartitionSpec {
    Uniform { horizon: f64, steps: usize },
    Times { times: Vec<f64> },
}

impl Default for PartitionSpec {
    fn default() -> Self {
        Self::Uniform {
            horizon: 1.0,
            steps: 4,
        }
    }
}

impl PartitionSpec {
    pub fn build(&self) -> Result<Partition<f64>, String> {
        match self {
            Self::Uniform { horizon, steps } => Partition::uniform(*horizon, *steps),
            Self::Times { times } => Partition::from_times(times.clone()),
        }
        .map_err(|e| format!("partition: {e}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Oracle {
    Tree,
    Pde,
    Mc,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OracleSelection {
    One(Oracle),
    Many(Vec<Oracle>),
}

impl Default for OracleSelection {
    fn default() -> Self {
        Self::One(Oracle::All)
    }
}

impl OracleSelection {
    pub fn includes(&self, o: Oracle) -> bool {
        let list: &[Oracle] = match self {
            Self::One(x) => std::slice::from_ref(x),
            Self::Many(v) => v,
        };
        list.iter().any(|&x| x == o || x == Oracle::All)
    }
}

/// Tolerances of the checks; every entry must be finite and non-negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Identities evaluated exactly on scenario trees.
    pub tree: f64,
    /// PDE oracle against a forced value.
    pub pde: f64,
    /// Monte-Carlo estimate against a forced value, relative.
    pub mc_relative: f64,
    /// Tree against PDE, and against closed forms.
    pub cross_oracle: f64,
    /// Standard errors allowed above a bound.
    pub mc_se: f64,
    /// Pathwise identities of stopped integrals.
    pub pathwise: f64,
    /// Truncated against stopped Itô evaluations.
    pub localization: f64,
    /// Residual of affine test functions.
    pub affine: f64,
    /// Final truncation-gap norm.
    pub truncation_norm: f64,
    /// Smallest fitted convergence order.
    pub min_order: f64,
    /// `M^2` norm example, relative.
    pub norm_relative: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tree: 1e-9,
            pde: 1e-3,
            mc_relative: 0.02,
            cross_oracle: 5e-3,
            mc_se: 3.0,
            pathwise: 1e-15,
            localization: 1e-12,
            affine: 1e-12,
            truncation_norm: 1e-2,
            min_order: 0.4,
            norm_relative: 0.02,
        }
    }
}

impl Tolerances {
    fn entries(&self) -> [(&'static str, f64); 11] {
        [
            ("tree", self.tree),
            ("pde", self.pde),
            ("mc_relative", self.mc_relative),
            ("cross_oracle", self.cross_oracle),
            ("mc_se", self.mc_se),
            ("pathwise", self.pathwise),
            ("localization", self.localization),
            ("affine", self.affine),
            ("truncation_norm", self.truncation_norm),
            ("min_order", self.min_order),
            ("norm_relative", self.norm_relative),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub stem: String,
    pub plot_data: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("gstoch-out"),
            stem: "report".to_string(),
            plot_data: true,
        }
    }
}

fn default_alpha() -> f64 {
    1.5
}

fn forced_paths() -> usize {
    100_000
}

fn compare_payoffs() -> Vec<PayoffRef> {
    COMPARE_PANEL.iter().map(|n| PayoffRef::named(n)).collect()
}

fn lattice_steps() -> usize {
    1024
}

fn lattice_steps_multi() -> usize {
    256
}

fn pde_dx() -> f64 {
    1.0 / 32.0
}

fn instances() -> usize {
    100
}

fn max_depth() -> usize {
    4
}

fn square() -> PayoffRef {
    PayoffRef::named("square")
}

fn i_max() -> u32 {
    12
}

fn two_time_mixed() -> PayoffRef {
    PayoffRef::named("two_time_mixed")
}

fn observed() -> Vec<f64> {
    vec![-0.5, 0.0, 0.5]
}

fn depth() -> usize {
    5
}

fn identity_instances() -> usize {
    20
}

fn mc_steps() -> usize {
    64
}

fn fine_steps() -> usize {
    1 << 15
}

fn grid_steps() -> Vec<usize> {
    vec![1 << 9, 1 << 10, 1 << 11, 1 << 12, 1 << 13]
}

fn norm_paths() -> usize {
    1000
}

fn formula_cases() -> Vec<String> {
    CONVERGENCE_PANEL
        .iter()
        .chain(AFFINE_CASES.iter())
        .map(|s| s.to_string())
        .collect()
}

fn mesh_steps() -> Vec<usize> {
    vec![16, 32, 64, 128, 256]
}

fn localization_case() -> String {
    "cubic_state".to_string()
}

fn levels() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 16.0, 256.0, 1e12]
}

/// One entry of the check list; `kind` selects the family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    GFunction {
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    ForcedValue {
        #[serde(default = "forced_paths")]
        paths: usize,
    },
    Expect {
        payoff: PayoffRef,
        #[serde(default)]
        target: Option<f64>,
    },
    Compare {
        #[serde(default = "compare_payoffs")]
        payoffs: Vec<PayoffRef>,
        #[serde(default = "lattice_steps")]
        lattice_steps: usize,
        #[serde(default = "lattice_steps_multi")]
        lattice_steps_multi: usize,
        #[serde(default = "pde_dx")]
        pde_dx: f64,
    },
    Axioms {
        #[serde(default = "instances")]
        instances: usize,
        #[serde(default = "max_depth")]
        max_depth: usize,
    },
    DynamicConsistency {
        #[serde(default = "instances")]
        instances: usize,
        #[serde(default = "max_depth")]
        max_depth: usize,
    },
    Approximation {
        #[serde(default = "square")]
        payoff: PayoffRef,
        #[serde(default)]
        level: Option<usize>,
        #[serde(default = "i_max")]
        i_max: u32,
    },
    ConditionalOracle {
        #[serde(default = "two_time_mixed")]
        payoff: PayoffRef,
        #[serde(default = "observed")]
        observed: Vec<f64>,
        #[serde(default = "lattice_steps_multi")]
        lattice_steps: usize,
        #[serde(default = "pde_dx")]
        pde_dx: f64,
    },
    ItoIdentities {
        #[serde(default = "depth")]
        depth: usize,
        #[serde(default = "identity_instances")]
        instances: usize,
        #[serde(default = "mc_steps")]
        mc_steps: usize,
    },
    Stopping {
        #[serde(default = "mc_steps")]
        steps: usize,
        #[serde(default = "fine_steps")]
        fine_steps: usize,
        #[serde(default = "grid_steps")]
        grid_steps: Vec<usize>,
        #[serde(default = "norm_paths")]
        norm_paths: usize,
    },
    ItoFormula {
        #[serde(default = "formula_cases")]
        cases: Vec<String>,
        #[serde(default = "mesh_steps")]
        mesh_steps: Vec<usize>,
    },
    Localization {
        #[serde(default = "localization_case")]
        case: String,
        #[serde(default = "levels")]
        levels: Vec<f64>,
        #[serde(default = "mc_steps")]
        steps: usize,
    },
}

/// Check families grouped by subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Expect,
    Conditional,
    ItoCheck,
    Bounds,
    Stopping,
    Compare,
}

impl CheckSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::GFunction { .. } => "g_function",
            Self::ForcedValue { .. } => "forced_value",
            Self::Expect { .. } => "expect",
            Self::Compare { .. } => "compare",
            Self::Axioms { .. } => "axioms",
            Self::DynamicConsistency { .. } => "dynamic_consistency",
            Self::Approximation { .. } => "approximation",
            Self::ConditionalOracle { .. } => "conditional_oracle",
            Self::ItoIdentities { .. } => "ito_identities",
            Self::Stopping { .. } => "stopping",
            Self::ItoFormula { .. } => "ito_formula",
            Self::Localization { .. } => "localization",
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Self::GFunction { .. } | Self::ForcedValue { .. } | Self::Expect { .. } => {
                Family::Expect
            }
            Self::Compare { .. } => Family::Compare,
            Self::Axioms { .. }
            | Self::DynamicConsistency { .. }
            | Self::Approximation { .. }
            | Self::ConditionalOracle { .. } => Family::Conditional,
            Self::ItoIdentities { .. } => Family::Bounds,
            Self::Stopping { .. } => Family::Stopping,
            Self::ItoFormula { .. } | Self::Localization { .. } => Family::ItoCheck,
        }
    }

    fn from_json(s: &str) -> Self {
        serde_json::from_str(s).expect("built-in check")
    }

    /// One check of every kind with default parameters.
    pub fn default_suite() -> Vec<Self> {
        [
            "g_function",
            "forced_value",
            "compare",
            "axioms",
            "dynamic_consistency",
            "approximation",
            "conditional_oracle",
            "ito_identities",
            "stopping",
            "ito_formula",
            "localization",
        ]
        .iter()
        .map(|k| Self::from_json(&format!("{{\"kind\": \"{k}\"}}")))
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub uncertainty: UncertaintySpec,
    pub partition: PartitionSpec,
    pub oracles: OracleSelection,
    /// Monte-Carlo sample count per control.
    pub paths: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub checks: Vec<CheckSpec>,
    pub output: OutputSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            uncertainty: UncertaintySpec::default(),
            partition: PartitionSpec::default(),
            oracles: OracleSelection::default(),
            paths: 10_000,
            seed: 42,
            tolerances: Tolerances::default(),
            checks: CheckSpec::default_suite(),
            output: OutputSpec::default(),
        }
    }
}

fn halving(steps: &[usize]) -> bool {
    steps.first().is_some_and(|&s| s > 0) && steps.windows(2).all(|w| w[1] == 2 * w[0])
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("config does not parse: {e}"))
    }

    /// Every problem found, in check order.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let u = self.uncertainty.build().map_err(|e| errs.push(e)).ok();
        let dim = u.as_ref().map(|u| u.dim());
        let p = self.partition.build().map_err(|e| errs.push(e)).ok();
        let horizon = p.as_ref().map_or(1.0, |p| p.horizon());
        for (name, v) in self.tolerances.entries() {
            if !(v.is_finite() && v >= 0.0) {
                errs.push(format!(
                    "tolerance '{name}' must be finite and non-negative, got {v}"
                ));
            }
        }
        if self.paths < 2 {
            errs.push("paths must be at least 2".to_string());
        }
        if self.output.stem.is_empty() || self.output.stem.contains(['/', '\\']) {
            errs.push("output stem must be a plain file name".to_string());
        }
        if self.checks.is_empty() {
            errs.push("no checks configured".to_string());
        }
        let one_d = |errs: &mut Vec<String>, what: &str| {
            if dim.is_some_and(|d| d != 1) {
                errs.push(format!("{what} requires an interval uncertainty set"));
            }
        };
        for (i, c) in self.checks.iter().enumerate() {
            let at = format!("checks[{i}] ({})", c.kind());
            let payoff = |errs: &mut Vec<String>, r: &PayoffRef| {
                if let Err(e) = Payoff::resolve(r, horizon) {
                    errs.push(format!("{at}: {e}"));
                }
            };
            match c {
                CheckSpec::GFunction { alpha } => {
                    if !alpha.is_finite() {
                        errs.push(format!("{at}: alpha must be finite"));
                    }
                }
                CheckSpec::ForcedValue { paths } => {
                    one_d(&mut errs, &at);
                    if *paths < 2 {
                        errs.push(format!("{at}: paths must be at least 2"));
                    }
                }
                CheckSpec::Expect { payoff: r, target } => {
                    one_d(&mut errs, &at);
                    payoff(&mut errs, r);
                    if target.is_some_and(|t| !t.is_finite()) {
                        errs.push(format!("{at}: target must be finite"));
                    }
                    if target.is_none()
                        && !self.oracles.includes(Oracle::Pde)
                        && !self.oracles.includes(Oracle::Mc)
                    {
                        errs.push(format!("{at}: needs a target or a second oracle"));
                    }
                }
                CheckSpec::Compare {
                    payoffs,
                    lattice_steps,
                    lattice_steps_multi,
                    pde_dx,
                } => {
                    one_d(&mut errs, &at);
                    if payoffs.is_empty() {
                        errs.push(format!("{at}: payoff list is empty"));
                    }
                    for r in payoffs {
                        payoff(&mut errs, r);
                    }
                    if *lattice_steps < 2
                        || *lattice_steps_multi < 2
                        || lattice_steps_multi % 2 != 0
                    {
                        errs.push(format!(
                            "{at}: lattice steps must be at least 2 and even for two-time payoffs"
                        ));
                    }
                    if !(pde_dx.is_finite() && *pde_dx > 0.0) {
                        errs.push(format!("{at}: pde_dx must be positive"));
                    }
                }
                CheckSpec::Axioms {
                    instances,
                    max_depth,
                }
                | CheckSpec::DynamicConsistency {
                    instances,
                    max_depth,
                } => {
                    if *instances == 0 {
                        errs.push(format!("{at}: instances must be at least 1"));
                    }
                    let min = if matches!(c, CheckSpec::Axioms { .. }) {
                        1
                    } else {
                        3
                    };
                    if !(min..=6).contains(max_depth) {
                        errs.push(format!("{at}: max_depth must lie in {min}..=6"));
                    }
                }
                CheckSpec::Approximation {
                    payoff: r,
                    level,
                    i_max,
                } => {
                    one_d(&mut errs, &at);
                    payoff(&mut errs, r);
                    if let Some(p) = &p {
                        if level.is_some_and(|l| l > p.steps()) {
                            errs.push(format!("{at}: level beyond the partition"));
                        }
                        if p.steps() > 8 {
                            errs.push(format!("{at}: tree partitions are limited to 8 steps"));
                        }
                    }
                    if *i_max > 30 {
                        errs.push(format!("{at}: i_max must be at most 30"));
                    }
                }
                CheckSpec::ConditionalOracle {
                    payoff: r,
                    observed,
                    lattice_steps,
                    pde_dx,
                } => {
                    one_d(&mut errs, &at);
                    payoff(&mut errs, r);
                    if Payoff::resolve(r, horizon).is_ok_and(|p| p.times.len() < 2) {
                        errs.push(format!("{at}: conditioning needs a two-time payoff"));
                    }
                    if observed.iter().any(|x| !x.is_finite()) || observed.is_empty() {
                        errs.push(format!(
                            "{at}: observed values must be finite and non-empty"
                        ));
                    }
                    if *lattice_steps < 2 || lattice_steps % 2 != 0 {
                        errs.push(format!("{at}: lattice steps must be even"));
                    }
                    if !(pde_dx.is_finite() && *pde_dx > 0.0) {
                        errs.push(format!("{at}: pde_dx must be positive"));
                    }
                }
                CheckSpec::ItoIdentities {
                    depth,
                    instances,
                    mc_steps,
                } => {
                    one_d(&mut errs, &at);
                    if !(1..=6).contains(depth) || *instances == 0 || *mc_steps == 0 {
                        errs.push(format!(
                            "{at}: depth must lie in 1..=6, instances and mc_steps at least 1"
                        ));
                    }
                }
                CheckSpec::Stopping {
                    steps,
                    fine_steps,
                    grid_steps,
                    norm_paths,
                } => {
                    one_d(&mut errs, &at);
                    if *steps == 0 || *norm_paths < 2 {
                        errs.push(format!(
                            "{at}: steps must be positive and norm_paths at least 2"
                        ));
                    }
                    if grid_steps.len() < 2
                        || !halving(grid_steps)
                        || grid_steps
                            .iter()
                            .any(|g| *fine_steps == 0 || fine_steps % g != 0)
                    {
                        errs.push(format!(
                            "{at}: grid_steps must double at each level and divide fine_steps"
                        ));
                    }
                }
                CheckSpec::ItoFormula { cases, mesh_steps } => {
                    if cases.is_empty() {
                        errs.push(format!("{at}: case list is empty"));
                    }
                    for name in cases {
                        check_case(&mut errs, &at, name, dim);
                    }
                    if mesh_steps.len() < 3 || !halving(mesh_steps) {
                        errs.push(format!(
                            "{at}: at least three meshes, each halving the previous"
                        ));
                    }
                }
                CheckSpec::Localization {
                    case,
                    levels,
                    steps,
                } => {
                    check_case(&mut errs, &at, case, dim);
                    if levels.is_empty()
                        || levels.iter().any(|k| !(k.is_finite() && *k > 0.0))
                        || levels.windows(2).any(|w| w[1] <= w[0])
                    {
                        errs.push(format!("{at}: levels must be positive and increasing"));
                    }
                    if *steps == 0 {
                        errs.push(format!("{at}: steps must be positive"));
                    }
                }
            }
        }
        errs
    }
}

fn check_case(errs: &mut Vec<String>, at: &str, name: &str, dim: Option<usize>) {
    if !CASE_NAMES.contains(&name) {
        errs.push(format!("{at}: unknown test case '{name}'"));
        return;
    }
    let case = builtin_case::<f64>(name).expect("listed case");
    if dim.is_some_and(|d| d != case.coeffs.noise_dim()) {
        errs.push(format!(
            "{at}: case '{name}' is driven by a {}-dimensional B",
            case.coeffs.noise_dim()
        ));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = ExperimentConfig::default();
        assert!(c.validate().is_empty(), "{:?}", c.validate());
        assert_eq!(c.checks.len(), 11);
        let parsed = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(parsed, c);
    }

    #[test]
    fn parses_both_shapes() {
        let c = ExperimentConfig::from_json(
            r#"{
                "uncertainty": {"theta": [[[1.0, 0.0], [0.0, 0.5]]]},
                "partition": {"times": [0.0, 0.5, 1.0]},
                "oracles": ["tree", "mc"],
                "checks": [{"kind": "g_function", "alpha": -2.0},
                           {"kind": "expect", "payoff": {"name": "call", "params": {"strike": 0.1}}}]
            }"#,
        )
        .unwrap();
        assert!(c.oracles.includes(Oracle::Mc) && !c.oracles.includes(Oracle::Pde));
        let errs = c.validate();
        assert_eq!(errs.len(), 1, "{errs:?}");
        assert!(errs[0].contains("interval"));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"checks": [{"kind": "nope"}]}"#).is_err());
        assert!(
            ExperimentConfig::from_json(r#"{"checks": [{"kind": "g_function", "beta": 1}]}"#)
                .is_err()
        );
        let c = ExperimentConfig::from_json(r#"{"tolerances": {"pde": -1.0}}"#).unwrap();
        assert_eq!(c.validate().len(), 1);
        let c = ExperimentConfig::from_json(
            r#"{"checks": [{"kind": "ito_formula", "cases": ["nope", "decoupled_2d"]}]}"#,
        )
        .unwrap();
        assert_eq!(c.validate().len(), 2);
        let c =
            ExperimentConfig::from_json(r#"{"uncertainty": {"sigma_lo": 2.0, "sigma_hi": 1.0}}"#)
                .unwrap();
        assert!(!c.validate().is_empty());
        let c = ExperimentConfig::from_json(
            r#"{"checks": [{"kind": "stopping", "grid_steps": [512, 1000]}]}"#,
        )
        .unwrap();
        assert_eq!(c.validate().len(), 1);
        let c = ExperimentConfig::from_json(r#"{"tolerances": {"tree": 0.0}}"#).unwrap();
        assert!(c.validate().is_empty());
    }
}
