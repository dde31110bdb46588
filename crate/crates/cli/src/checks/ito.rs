//! Identities and bounds of the stochastic integrals, and stopping times.

use gstoch_core::ito::{
    conditional_moment_bounds, grid_stopping_time, integrate, ito_integral, mp_norm_mc,
    stopped_integral, truncation_gap_moments, Integrator, SimpleProcess, StopRule, StoppingTime,
};
use gstoch_core::sublinear::{
    map_paths, mean_and_se, simulate_paths, NodeFunction, Partition, PathView, PolicyRule,
    ScenarioTree, SimGrid,
};
use gstoch_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Ctx, MC_CONTROLS};
use crate::anchor::Anchor;
use crate::report::Relation;

fn terminal(eta: &SimpleProcess<f64>, p: &PathView<'_, f64>, integrator: Integrator<f64>) -> f64 {
    integrate(eta, p, integrator)
        .expect("process lives on the tree grid")
        .terminal()
}

const IDENTITY_ROWS: [(&str, Anchor); 9] = [
    ("ito.zero_mean.tree", Anchor::ZeroMean),
    ("ito.isometry_bound.tree", Anchor::IsometryBound),
    ("ito.isometry_equality.tree", Anchor::IsometryEquality),
    ("ito.squared_increment.tree", Anchor::SquaredIncrement),
    ("ito.qv_bound.tree", Anchor::QvBound),
    ("ito.moment_bound_time.tree", Anchor::MomentBounds),
    ("ito.moment_bound_qv.tree", Anchor::MomentBounds),
    ("ito.conditional_mean.tree", Anchor::IntegralMartingale),
    ("ito.constant_moment_equality.tree", Anchor::MomentBounds),
];

pub fn identities(
    ctx: &mut Ctx<'_>,
    depth: usize,
    instances: usize,
    mc_steps: usize,
) -> Result<()> {
    let (_, hi) = ctx.sigmas();
    let s2 = hi * hi;
    let t = ctx.horizon();
    let grid = Partition::uniform(t, depth)?;
    let tree = ScenarioTree::with_defaults(&ctx.u, &grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut worst = [0.0f64; 9];
    let e = |f: &NodeFunction<f64>| tree.expect(f);
    for _ in 0..instances {
        let nodes = (0..depth)
            .map(|k| {
                NodeFunction::new(
                    k,
                    (0..tree.level_size(k))
                        .map(|_| rng.random_range(-2.0..2.0))
                        .collect(),
                )
            })
            .collect();
        let eta = SimpleProcess::from_nodes(&grid, nodes)?;
        let sq = eta.map(|x| x * x);
        let abs = eta.map(f64::abs);
        let i = tree.leaf_values(|p| terminal(&eta, p, Integrator::Brownian(0)));
        let i2 = i.map(|x| x * x);
        let dt2 = e(&tree.leaf_values(|p| terminal(&sq, p, Integrator::Time)))?;
        let qv2 = e(&tree.leaf_values(|p| terminal(&sq, p, Integrator::Covariation(0, 0))))?;
        worst[0] = worst[0].max(e(&i)?.abs()).max(e(&i.map(|x| -x))?.abs());
        worst[1] = worst[1].max(e(&i2)? - s2 * dt2);
        worst[2] = worst[2].max((e(&i2)? - qv2).abs());
        let k = rng.random_range(0..depth);
        let dt = grid.dt(k);
        let block = tree.leaf_values(|p| {
            let xi = eta.bind(p).expect("tree grid").value(k);
            xi * xi * p.db(k, 0).powi(2) - s2 * xi * xi * dt
        });
        worst[3] = worst[3].max(e(&block)?.abs());
        let q_abs =
            e(&tree.leaf_values(|p| terminal(&eta, p, Integrator::Covariation(0, 0)).abs()))?;
        let dt_abs = e(&tree.leaf_values(|p| terminal(&abs, p, Integrator::Time)))?;
        worst[4] = worst[4].max(q_abs - s2 * dt_abs);
        for s in 0..depth {
            for u in s + 1..=depth {
                let r = conditional_moment_bounds(&eta, &tree, s, u)?;
                worst[5] = worst[5].max(r.time_violation);
                worst[6] = worst[6].max(r.qv_violation);
            }
        }
        let s = rng.random_range(0..depth);
        let x = NodeFunction::new(
            depth,
            (0..tree.level_size(depth))
                .map(|_| rng.random_range(-2.0..2.0))
                .collect(),
        );
        let tail = tree.leaf_values(|p| {
            let r = ito_integral(&eta, p).expect("tree grid");
            r.terminal() - r.at(s)
        });
        let shifted = x.zip_with(&tail, |a, b| a + b)?;
        worst[7] = worst[7].max(
            tree.conditional(&shifted, s)?
                .max_abs_diff(&tree.conditional(&x, s)?),
        );
    }
    let c = 1.7;
    let one = SimpleProcess::constant(&grid, c);
    for s in 0..depth {
        for u in s + 1..=depth {
            let r = conditional_moment_bounds(&one, &tree, s, u)?;
            worst[8] = worst[8].max(r.time_lhs.max_abs_diff(&r.time_rhs));
        }
    }
    let tol = ctx.tol().tree;
    for ((id, anchor), v) in IDENTITY_ROWS.iter().zip(worst) {
        ctx.row(*id, *anchor, Relation::AtMost, v, 0.0, tol);
    }
    if !ctx.cfg.oracles.includes(crate::config::Oracle::Mc) {
        return Ok(());
    }

    let mc_grid = Partition::uniform(t, mc_steps)?;
    let b = SimpleProcess::brownian(&mc_grid, 0);
    let k = ctx.tol().mc_se;
    let mut bundles = Vec::new();
    for control in MC_CONTROLS {
        let rule = PolicyRule::named(control, &ctx.u, ctx.seed)?;
        let bundle = simulate_paths(
            &ctx.u,
            &rule,
            &SimGrid::new(&mc_grid),
            ctx.cfg.paths,
            ctx.seed,
        )?;
        let vals = (0..bundle.len())
            .map(|i| Ok(ito_integral(&b, &bundle.view(i))?.terminal()))
            .collect::<Result<Vec<f64>>>()?;
        let (m, se) = mean_and_se(&vals);
        ctx.row(
            format!("ito.zero_mean.mc.{control}"),
            Anchor::ZeroMean,
            Relation::AtMost,
            m.abs(),
            0.0,
            k * se,
        );
        bundles.push(bundle);
    }
    let (norm, _) = mp_norm_mc(&b, 2, &bundles)?;
    let rel = ctx.tol().norm_relative;
    ctx.row(
        "ito.mp_norm_brownian.mc",
        Anchor::NormExample,
        Relation::RelDiff,
        norm,
        hi * t / 2f64.sqrt(),
        rel,
    );

    let rule = PolicyRule::named("sigma_hi", &ctx.u, ctx.seed)?;
    let mut means = Vec::new();
    let mut plot = Vec::new();
    for level in (0..4).rev() {
        let steps = (mc_steps >> level).max(1);
        let mesh = Partition::uniform(t, steps)?;
        let sim = SimGrid::coupled(&mesh, &mc_grid)?;
        let bm = SimpleProcess::brownian(&mesh, 0);
        let inc = map_paths(&ctx.u, &rule, &sim, ctx.seed, 0, ctx.cfg.paths, |p| {
            ito_integral(&bm, &p.view())
                .expect("own grid")
                .max_increment()
        })?;
        let m = mean_and_se(&inc).0;
        plot.push((mesh.mesh(), m));
        means.push(m);
    }
    ctx.flag(
        "ito.path_continuity.decreasing",
        Anchor::PathContinuity,
        means.windows(2).all(|w| w[1] < w[0]),
    );
    ctx.plot("path_continuity".to_string(), plot);
    Ok(())
}

pub fn stopping(
    ctx: &mut Ctx<'_>,
    steps: usize,
    fine_steps: usize,
    grid_steps: &[usize],
    norm_paths: usize,
) -> Result<()> {
    let (lo, hi) = ctx.sigmas();
    let t = ctx.horizon();
    let grid = Partition::uniform(t, steps)?;
    let rule = PolicyRule::named("random_switching", &ctx.u, ctx.seed)?;
    let bundle = simulate_paths(&ctx.u, &rule, &SimGrid::new(&grid), ctx.cfg.paths, ctx.seed)?;
    let eta = SimpleProcess::brownian(&grid, 0);
    let exit = StoppingTime::first_exit(0.5 * hi * t.sqrt());
    let rules = [
        ("first_exit", exit.clone()),
        (
            "qv_level",
            StoppingTime::new(StopRule::QvAbove {
                component: 0,
                level: 0.25 * (lo * lo + hi * hi) * t,
            }),
        ),
        (
            "first_above_or_time",
            StoppingTime::new(StopRule::FirstAbove {
                component: 0,
                level: 0.3 * hi * t.sqrt(),
            })
            .either(StoppingTime::at(0.7 * t)),
        ),
    ];
    let tol = ctx.tol().clone();
    for (name, tau) in &rules {
        let gaps = (0..bundle.len())
            .map(|i| {
                Ok(stopped_integral(&eta, tau, &bundle.view(i), t, Integrator::Brownian(0))?.gap())
            })
            .collect::<Result<Vec<f64>>>()?;
        let worst = gaps.into_iter().fold(0.0, f64::max);
        ctx.row(
            format!("stopping.stopped_identity.{name}"),
            Anchor::StoppedIntegral,
            Relation::AtMost,
            worst,
            0.0,
            tol.pathwise,
        );
    }

    let coarse = Partition::uniform(t, (steps / 4).max(1))?;
    let rounded = grid_stopping_time(&exit, &coarse);
    let (mut below, mut above) = (0.0f64, 0.0f64);
    for i in 0..bundle.len() {
        let v = bundle.view(i);
        let (a, b) = (exit.realize(&v), rounded.realize(&v));
        below = below.max(a - b);
        above = above.max(b - a - coarse.mesh());
    }
    ctx.row(
        "stopping.rounding.not_before",
        Anchor::GridStopping,
        Relation::AtMost,
        below,
        0.0,
        tol.tree,
    );
    ctx.row(
        "stopping.rounding.within_mesh",
        Anchor::GridStopping,
        Relation::AtMost,
        above,
        0.0,
        tol.tree,
    );

    let fine = Partition::uniform(t, fine_steps)?;
    let grids = grid_steps
        .iter()
        .map(|&g| Partition::uniform(t, g))
        .collect::<Result<Vec<_>>>()?;
    let one = SimpleProcess::constant(&fine, 1.0);
    let tau = StoppingTime::first_exit(hi * t.sqrt());
    let mut worst = vec![0.0f64; grids.len()];
    for control in MC_CONTROLS {
        let rule = PolicyRule::named(control, &ctx.u, ctx.seed)?;
        let m = truncation_gap_moments(
            &one,
            &tau,
            &grids,
            2,
            &ctx.u,
            &rule,
            &SimGrid::new(&fine),
            norm_paths,
            ctx.seed,
        )?;
        for (w, (mean, _)) in worst.iter_mut().zip(m) {
            *w = w.max(mean);
        }
    }
    let norms: Vec<f64> = worst.iter().map(|m| m.sqrt()).collect();
    for k in 1..norms.len() {
        ctx.row(
            format!("stopping.truncation_norm.decrease.n{}", grid_steps[k]),
            Anchor::GridStopping,
            Relation::AtMost,
            norms[k],
            norms[k - 1],
            0.0,
        );
    }
    let last = *norms.last().expect("validated grid list");
    ctx.row(
        "stopping.truncation_norm.final",
        Anchor::GridStopping,
        Relation::AtMost,
        last,
        0.0,
        tol.truncation_norm,
    );
    ctx.plot(
        "truncation_norm".to_string(),
        grids
            .iter()
            .zip(&norms)
            .map(|(g, &n)| (g.mesh(), n))
            .collect(),
    );
    Ok(())
}
