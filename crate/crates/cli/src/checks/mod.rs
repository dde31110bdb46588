//! Check families. Every check returns its rows in a fixed order.

mod conditional;
mod formula;
mod ito;
mod sublinear;

use gstoch_core::sublinear::{
    map_paths, mean_and_se, Partition, PolicyRule, SimGrid, UncertaintySet,
};
use gstoch_core::Result;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::anchor::Anchor;
use crate::config::{CheckSpec, ExperimentConfig, Tolerances};
use crate::payoffs::Payoff;
use crate::report::{PlotData, Relation, ReportRow};

/// Control rules each Monte-Carlo estimate is taken under.
pub const MC_CONTROLS: [&str; 3] = ["sigma_lo", "sigma_hi", "random_switching"];

/// Seed of check `index` derived from the experiment seed.
pub fn check_seed(seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng.next_u64()
}

pub struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub u: UncertaintySet<f64>,
    pub partition: Partition<f64>,
    pub seed: u64,
    rows: Vec<ReportRow>,
    plots: Vec<PlotData>,
}

impl<'a> Ctx<'a> {
    pub fn new(cfg: &'a ExperimentConfig, seed: u64) -> std::result::Result<Self, String> {
        Ok(Self {
            cfg,
            u: cfg.uncertainty.build()?,
            partition: cfg.partition.build()?,
            seed,
            rows: Vec::new(),
            plots: Vec::new(),
        })
    }

    pub fn tol(&self) -> &Tolerances {
        &self.cfg.tolerances
    }

    pub fn horizon(&self) -> f64 {
        self.partition.horizon()
    }

    pub fn sigmas(&self) -> (f64, f64) {
        self.u
            .interval_bounds()
            .expect("validated interval uncertainty")
    }

    pub fn row(
        &mut self,
        check: impl Into<String>,
        anchor: Anchor,
        relation: Relation,
        value: f64,
        target: f64,
        tolerance: f64,
    ) {
        self.rows.push(ReportRow::new(
            check, anchor, relation, value, target, tolerance, self.seed,
        ));
    }

    /// `value == 1` for a boolean outcome.
    pub fn flag(&mut self, check: impl Into<String>, anchor: Anchor, ok: bool) {
        self.row(
            check,
            anchor,
            Relation::AbsDiff,
            f64::from(u8::from(ok)),
            1.0,
            0.0,
        );
    }

    pub fn plot(&mut self, name: String, points: Vec<(f64, f64)>) {
        self.plots.push(PlotData { name, points });
    }

    pub fn finish(self) -> (Vec<ReportRow>, Vec<PlotData>) {
        (self.rows, self.plots)
    }

    /// Sample mean and standard error of `payoff` under each of
    /// [`MC_CONTROLS`], on a uniform grid of `steps` steps.
    pub fn mc_estimates(
        &self,
        payoff: &Payoff,
        paths: usize,
        steps: usize,
        seed: u64,
    ) -> Result<Vec<(&'static str, f64, f64)>> {
        let grid = Partition::uniform(self.horizon(), steps)?;
        let cyl = payoff.cylinder();
        let levels = cyl.bind(&grid)?;
        MC_CONTROLS
            .iter()
            .map(|&name| {
                let rule = PolicyRule::named(name, &self.u, seed)?;
                let vals = map_paths(&self.u, &rule, &SimGrid::new(&grid), seed, 0, paths, |p| {
                    cyl.eval_on_path(&levels, &p.view())
                })?;
                let (m, se) = mean_and_se(&vals);
                Ok((name, m, se))
            })
            .collect()
    }
}

pub type Output = (Vec<ReportRow>, Vec<PlotData>);

pub fn run_check(
    spec: &CheckSpec,
    cfg: &ExperimentConfig,
    seed: u64,
) -> std::result::Result<Output, String> {
    let mut ctx = Ctx::new(cfg, seed)?;
    let r = match spec {
        CheckSpec::GFunction { alpha } => sublinear::g_function(&mut ctx, *alpha),
        CheckSpec::ForcedValue { paths } => sublinear::forced_value(&mut ctx, *paths),
        CheckSpec::Expect { payoff, target } => sublinear::expect(&mut ctx, payoff, *target),
        CheckSpec::Compare {
            payoffs,
            lattice_steps,
            lattice_steps_multi,
            pde_dx,
        } => sublinear::compare(
            &mut ctx,
            payoffs,
            *lattice_steps,
            *lattice_steps_multi,
            *pde_dx,
        ),
        CheckSpec::Axioms {
            instances,
            max_depth,
        } => conditional::axioms(&mut ctx, *instances, *max_depth),
        CheckSpec::DynamicConsistency {
            instances,
            max_depth,
        } => conditional::dynamic_consistency(&mut ctx, *instances, *max_depth),
        CheckSpec::Approximation {
            payoff,
            level,
            i_max,
        } => conditional::approximation(&mut ctx, payoff, *level, *i_max),
        CheckSpec::ConditionalOracle {
            payoff,
            observed,
            lattice_steps,
            pde_dx,
        } => conditional::oracle(&mut ctx, payoff, observed, *lattice_steps, *pde_dx),
        CheckSpec::ItoIdentities {
            depth,
            instances,
            mc_steps,
        } => ito::identities(&mut ctx, *depth, *instances, *mc_steps),
        CheckSpec::Stopping {
            steps,
            fine_steps,
            grid_steps,
            norm_paths,
        } => ito::stopping(&mut ctx, *steps, *fine_steps, grid_steps, *norm_paths),
        CheckSpec::ItoFormula { cases, mesh_steps } => {
            formula::ito_formula(&mut ctx, cases, mesh_steps)
        }
        CheckSpec::Localization {
            case,
            levels,
            steps,
        } => formula::localization(&mut ctx, case, levels, *steps),
    };
    r.map_err(|e| format!("{} check failed to run: {e}", spec.kind()))?;
    Ok(ctx.finish())
}
