//! G function, forced values and the cross-oracle comparison.

use gstoch_core::gheat::{g_expectation_cylinder, gaussian_expectation, Grid1D};
use gstoch_core::sublinear::{upper_expectation, Lattice, Partition, ScenarioTree};
use gstoch_core::{Mat2, Result};

use super::Ctx;
use crate::anchor::Anchor;
use crate::config::Oracle;
use crate::payoffs::{Payoff, PayoffRef, Shape};
use crate::report::Relation;

/// Monte-Carlo grid for cylinder payoffs; contains `T / 2`.
const MC_STEPS: usize = 16;
const FORCED_DX: f64 = 1.0 / 32.0;

fn scaled(a: &Mat2<f64>, l: f64) -> Mat2<f64> {
    [[l * a[0][0], l * a[0][1]], [l * a[1][0], l * a[1][1]]]
}

fn sum(a: &Mat2<f64>, b: &Mat2<f64>) -> Mat2<f64> {
    [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ]
}

pub fn g_function(ctx: &mut Ctx<'_>, alpha: f64) -> Result<()> {
    let tol = ctx.tol().tree;
    let lambda = 2.5;
    let (closed, value, homog, sub) = match ctx.u.interval_bounds() {
        Some((lo, hi)) => {
            let g = |a: f64| ctx.u.g(a);
            let beta = 0.7 - 0.6 * alpha;
            let closed = 0.5 * (hi * hi * alpha.max(0.0) - lo * lo * (-alpha).max(0.0));
            (
                closed,
                g(alpha)?,
                (g(lambda * alpha)?, lambda * g(alpha)?),
                g(alpha + beta)? - g(alpha)? - g(beta)?,
            )
        }
        None => {
            let a = [[alpha, 0.3], [0.3, -0.5 * alpha]];
            let b = [[-0.4, alpha], [alpha, 0.8]];
            let theta = ctx.u.theta().expect("covariance set");
            let closed = 0.5
                * theta
                    .iter()
                    .map(|q| a[0][0] * q[0][0] + 2.0 * a[0][1] * q[0][1] + a[1][1] * q[1][1])
                    .fold(f64::NEG_INFINITY, f64::max);
            let g = |m: &Mat2<f64>| ctx.u.g_matrix(m);
            (
                closed,
                g(&a)?,
                (g(&scaled(&a, lambda))?, lambda * g(&a)?),
                g(&sum(&a, &b))? - g(&a)? - g(&b)?,
            )
        }
    };
    ctx.row(
        "g_function.closed_form",
        Anchor::GFunction,
        Relation::AbsDiff,
        value,
        closed,
        tol,
    );
    ctx.row(
        "g_function.homogeneity",
        Anchor::GFunction,
        Relation::AbsDiff,
        homog.0,
        homog.1,
        tol,
    );
    ctx.row(
        "g_function.subadditivity",
        Anchor::GFunction,
        Relation::AtMost,
        sub,
        0.0,
        tol,
    );
    Ok(())
}

pub fn forced_value(ctx: &mut Ctx<'_>, paths: usize) -> Result<()> {
    let (lo, hi) = ctx.sigmas();
    let t = ctx.horizon();
    let tree = ScenarioTree::with_defaults(&ctx.u, &ctx.partition)?;
    let tol = ctx.tol().clone();
    for (name, target) in [("square", hi * hi * t), ("neg_square", -lo * lo * t)] {
        let p = Payoff::resolve(&PayoffRef::named(name), t).expect("registered");
        let v = upper_expectation(&tree, &p.cylinder())?;
        ctx.row(
            format!("forced_value.{name}.tree"),
            Anchor::ForcedValue,
            Relation::AbsDiff,
            v,
            target,
            tol.tree,
        );
        if ctx.cfg.oracles.includes(Oracle::Pde) {
            let grid = Grid1D::standard(&ctx.u, t, FORCED_DX)?;
            let v = g_expectation_cylinder(&p.terminal(), &p.times, &ctx.u, &grid)?;
            ctx.row(
                format!("forced_value.{name}.pde"),
                Anchor::ForcedValue,
                Relation::AbsDiff,
                v,
                target,
                tol.pde,
            );
        }
        if ctx.cfg.oracles.includes(Oracle::Mc) {
            let est = ctx.mc_estimates(&p, paths, ctx.partition.steps(), ctx.seed)?;
            let best = est.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
            ctx.row(
                format!("forced_value.{name}.mc"),
                Anchor::ForcedValue,
                Relation::RelDiff,
                best,
                target,
                tol.mc_relative,
            );
        }
    }
    Ok(())
}

fn pde_value(ctx: &Ctx<'_>, p: &Payoff, dx: f64) -> Result<f64> {
    let grid = Grid1D::standard(&ctx.u, ctx.horizon(), dx)?;
    g_expectation_cylinder(&p.terminal(), &p.times, &ctx.u, &grid)
}

fn mc_rows(ctx: &mut Ctx<'_>, prefix: &str, p: &Payoff, reference: f64) -> Result<()> {
    if !ctx.cfg.oracles.includes(Oracle::Mc) {
        return Ok(());
    }
    let k = ctx.tol().mc_se;
    for (control, mean, se) in ctx.mc_estimates(p, ctx.cfg.paths, MC_STEPS, ctx.seed)? {
        ctx.row(
            format!("{prefix}.mc.{control}"),
            Anchor::Representation,
            Relation::AtMost,
            mean,
            reference,
            k * se,
        );
    }
    Ok(())
}

pub fn expect(ctx: &mut Ctx<'_>, payoff: &PayoffRef, target: Option<f64>) -> Result<()> {
    let p = Payoff::resolve(payoff, ctx.horizon()).expect("validated payoff");
    let tree = ScenarioTree::with_defaults(&ctx.u, &ctx.partition)?;
    let v = upper_expectation(&tree, &p.cylinder())?;
    let tol = ctx.tol().cross_oracle;
    let prefix = format!("expect.{}", p.name);
    if let Some(t) = target {
        ctx.row(
            format!("{prefix}.tree"),
            Anchor::Representation,
            Relation::AbsDiff,
            v,
            t,
            tol,
        );
    }
    if ctx.cfg.oracles.includes(Oracle::Pde) {
        let w = pde_value(ctx, &p, FORCED_DX)?;
        ctx.row(
            format!("{prefix}.pde"),
            Anchor::Representation,
            Relation::AbsDiff,
            w,
            v,
            tol,
        );
    }
    mc_rows(ctx, &prefix, &p, v)
}

pub fn compare(
    ctx: &mut Ctx<'_>,
    payoffs: &[PayoffRef],
    steps_single: usize,
    steps_multi: usize,
    dx: f64,
) -> Result<()> {
    let (lo, hi) = ctx.sigmas();
    let t = ctx.horizon();
    let tol = ctx.tol().clone();
    for r in payoffs {
        let p = Payoff::resolve(r, t).expect("validated payoff");
        let prefix = format!("compare.{}", p.name);
        let steps = if p.times.len() == 1 {
            steps_single
        } else {
            steps_multi
        };
        let lattice = Lattice::new(&ctx.u, &Partition::uniform(t, steps)?)?;
        let v = lattice.expectation(&p.cylinder())?;
        let exact_tol = if p.name == "constant" {
            tol.tree
        } else {
            tol.cross_oracle
        };
        if ctx.cfg.oracles.includes(Oracle::Pde) {
            let w = pde_value(ctx, &p, dx)?;
            ctx.row(
                format!("{prefix}.tree_pde"),
                Anchor::Representation,
                Relation::AbsDiff,
                v,
                w,
                exact_tol,
            );
        }
        if p.times.len() == 1 && p.shape != Shape::Mixed {
            let sigma = if p.shape == Shape::Convex { hi } else { lo };
            let q = p.clone();
            let g = gaussian_expectation(move |x| q.eval(&[x]), 0.0, sigma * t.sqrt(), 10.0, 4000);
            ctx.row(
                format!("{prefix}.closed_form"),
                Anchor::Representation,
                Relation::AbsDiff,
                v,
                g,
                tol.cross_oracle,
            );
        }
        mc_rows(ctx, &prefix, &p, v)?;
    }
    Ok(())
}
