//! Sublinear expectation axioms, conditional expectation properties,
//! dynamic consistency and the approximation by simple random variables.

use gstoch_core::conditional::{
    approximate_by_simple, cond_expect_triple_both_ways, path_fn, scaling_identity_gap,
    Approximation, Quantization, TripleSimpleRandomVariable, DEFAULT_MULTIPLIER_BOUND,
};
use gstoch_core::gheat::{conditional_psi, Grid1D};
use gstoch_core::sublinear::{
    conditional_value, Lattice, NodeFunction, Partition, PathView, ScenarioTree, TreeConfig,
    UncertaintySet,
};
use gstoch_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Ctx;
use crate::anchor::Anchor;
use crate::payoffs::{Payoff, PayoffRef};
use crate::report::Relation;

/// Largest tree depth drawn for covariance sets.
const MAX_DEPTH_2D: usize = 3;

fn random_tree(
    ctx: &Ctx<'_>,
    rng: &mut ChaCha8Rng,
    min_depth: usize,
    max_depth: usize,
) -> Result<ScenarioTree<f64>> {
    let horizon = rng.random_range(0.5..2.0);
    if ctx.u.dim() == 2 {
        let depth = rng.random_range(min_depth..=max_depth.min(MAX_DEPTH_2D).max(min_depth));
        return ScenarioTree::with_defaults(&ctx.u, &Partition::uniform(horizon, depth)?);
    }
    let depth = rng.random_range(min_depth..=max_depth);
    let lo = rng.random_range(0.0..1.0);
    let hi = lo + rng.random_range(0.0..1.0);
    let u = UncertaintySet::interval(lo, hi)?;
    let points = rng.random_range(2..=3);
    ScenarioTree::build(
        &u,
        &Partition::uniform(horizon, depth)?,
        &TreeConfig::sigma_grid(&u, points)?,
    )
}

fn random_function(
    tree: &ScenarioTree<f64>,
    rng: &mut ChaCha8Rng,
    level: usize,
    scale: f64,
) -> NodeFunction<f64> {
    NodeFunction::new(
        level,
        (0..tree.level_size(level))
            .map(|_| rng.random_range(-scale..scale))
            .collect(),
    )
}

fn max_gap(a: &NodeFunction<f64>, b: &NodeFunction<f64>) -> f64 {
    a.max_abs_diff(b)
}

fn max_excess(a: &NodeFunction<f64>, b: &NodeFunction<f64>) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).max(0.0))
        .fold(0.0, f64::max)
}

fn increment(p: &PathView<'_, f64>, from: usize) -> f64 {
    (0..p.dim()).map(|c| p.b(p.last(), c) - p.b(from, c)).sum()
}

#[derive(Default)]
struct Worst {
    values: [f64; 11],
}

impl Worst {
    fn record(&mut self, i: usize, v: f64) {
        self.values[i] = self.values[i].max(v);
    }
}

const AXIOM_ROWS: [(&str, Anchor); 11] = [
    ("axioms.monotonicity", Anchor::ExpectationAxioms),
    ("axioms.constant_preserving", Anchor::ExpectationAxioms),
    ("axioms.subadditivity", Anchor::ExpectationAxioms),
    ("axioms.positive_homogeneity", Anchor::ExpectationAxioms),
    ("conditional.monotonicity", Anchor::ConditionalProperties),
    (
        "conditional.measurable_identity",
        Anchor::ConditionalProperties,
    ),
    (
        "conditional.difference_bound",
        Anchor::ConditionalProperties,
    ),
    (
        "conditional.multiplier_identity",
        Anchor::ConditionalProperties,
    ),
    ("conditional.independence", Anchor::ConditionalProperties),
    ("conditional.tower", Anchor::ConditionalProperties),
    ("conditional.mean_preserving", Anchor::ConditionalProperties),
];

pub fn axioms(ctx: &mut Ctx<'_>, instances: usize, max_depth: usize) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut w = Worst::default();
    for _ in 0..instances {
        let tree = random_tree(ctx, &mut rng, 1, max_depth)?;
        let n = tree.depth();
        let x = random_function(&tree, &mut rng, n, 2.0);
        let y = random_function(&tree, &mut rng, n, 2.0);
        let z = x.zip_with(&random_function(&tree, &mut rng, n, 1.0), |a, b| {
            a + b.abs()
        })?;
        let c = rng.random_range(-3.0..3.0);
        let lambda = rng.random_range(0.0..3.0);
        let e = |f: &NodeFunction<f64>| tree.expect(f);

        w.record(0, (e(&x)? - e(&z)?).max(0.0));
        w.record(
            1,
            (e(&NodeFunction::new(n, vec![c; tree.level_size(n)]))? - c).abs(),
        );
        w.record(
            2,
            (e(&x.zip_with(&y, |a, b| a + b)?)? - e(&x)? - e(&y)?).max(0.0),
        );
        w.record(3, (e(&x.map(|v| lambda * v))? - lambda * e(&x)?).abs());

        let s = rng.random_range(0..=n);
        let t = rng.random_range(0..=n);
        let cond = |f: &NodeFunction<f64>, k: usize| tree.conditional(f, k);
        w.record(4, max_excess(&cond(&x, s)?, &cond(&z, s)?));
        let eta = random_function(&tree, &mut rng, s, 2.0);
        w.record(5, max_gap(&cond(&tree.lift(&eta, n)?, s)?, &eta));
        let lhs = cond(&x, s)?.zip_with(&cond(&y, s)?, |a, b| a - b)?;
        w.record(
            6,
            max_excess(&lhs, &cond(&x.zip_with(&y, |a, b| a - b)?, s)?),
        );
        w.record(
            7,
            scaling_identity_gap(&tree, &eta, &x, DEFAULT_MULTIPLIER_BOUND)?,
        );
        let (a, b, q) = (
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let suffix = tree.leaf_values(|p| {
            let d = increment(p, s);
            let dq = p.qv(p.last(), 0, 0) - p.qv(s, 0, 0);
            a * d + b * d * d + q * dq + d.sin()
        });
        let whole = e(&suffix)?;
        let cs = cond(&suffix, s)?;
        w.record(
            8,
            cs.values
                .iter()
                .map(|v| (v - whole).abs())
                .fold(0.0, f64::max),
        );
        let et = cond(&x, t)?;
        let tower = if s <= t {
            max_gap(&cond(&et, s)?, &cond(&x, s)?)
        } else {
            max_gap(&cond(&tree.lift(&et, n)?, s)?, &tree.lift(&et, s)?)
        };
        w.record(9, tower);
        w.record(10, (e(&cond(&x, s)?)? - e(&x)?).abs());
    }
    let tol = ctx.tol().tree;
    for ((id, anchor), v) in AXIOM_ROWS.iter().zip(w.values) {
        ctx.row(*id, *anchor, Relation::AtMost, v, 0.0, tol);
    }
    Ok(())
}

pub fn dynamic_consistency(ctx: &mut Ctx<'_>, instances: usize, max_depth: usize) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let tree = random_tree(ctx, &mut rng, 3, max_depth)?;
        let n = tree.depth();
        let t = rng.random_range(3..=n);
        let r = rng.random_range(1..t);
        let s = rng.random_range(0..r);
        let k = rng.random_range(1..=3usize);
        let owner: Vec<usize> = (0..tree.level_size(s))
            .map(|_| rng.random_range(0..k))
            .collect();
        let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (node, &j) in owner.iter().enumerate() {
            blocks[j].push(node);
        }
        blocks.retain(|b| !b.is_empty());
        let mut first = Vec::new();
        let mut second = Vec::new();
        for _ in &blocks {
            let c: [f64; 6] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            first.push(path_fn(move |p: &PathView<'_, f64>| {
                let d = increment(p, s);
                c[0] + c[1] * d + c[2] * d * d
            }));
            second.push(path_fn(move |p: &PathView<'_, f64>| {
                let d = increment(p, r);
                c[3] + c[4] * d + c[5] * (p.qv(p.last(), 0, 0) - p.qv(r, 0, 0))
            }));
        }
        let trv = TripleSimpleRandomVariable::new(&tree, (s, r, t), blocks, first, second)?;
        let (direct, iterated) = cond_expect_triple_both_ways(&trv, &tree)?;
        worst = worst.max(max_gap(&direct, &iterated));
    }
    let tol = ctx.tol().tree;
    ctx.row(
        "dynamic_consistency.direct_vs_iterated",
        Anchor::DynamicConsistency,
        Relation::AtMost,
        worst,
        0.0,
        tol,
    );
    if let Some((_, hi)) = ctx.u.interval_bounds() {
        let tree = ScenarioTree::with_defaults(&ctx.u, &Partition::uniform(1.0, 4)?)?;
        let sq = |from: usize| path_fn(move |p: &PathView<'_, f64>| increment(p, from).powi(2));
        let trv = TripleSimpleRandomVariable::new(
            &tree,
            (1, 2, 4),
            vec![(0..tree.level_size(1)).collect()],
            vec![sq(1)],
            vec![sq(2)],
        )?;
        let (direct, iterated) = cond_expect_triple_both_ways(&trv, &tree)?;
        let target = hi.powi(4) * 0.25 * 0.5;
        let v = direct
            .values
            .iter()
            .chain(&iterated.values)
            .map(|v| (v - target).abs())
            .fold(0.0, f64::max);
        ctx.row(
            "dynamic_consistency.squared_increments",
            Anchor::DynamicConsistency,
            Relation::AtMost,
            v,
            0.0,
            tol,
        );
    }
    Ok(())
}

fn last_conditional(a: &Approximation<f64>) -> &NodeFunction<f64> {
    &a.steps.last().expect("non-empty sequence").conditional
}

pub fn approximation(
    ctx: &mut Ctx<'_>,
    payoff: &PayoffRef,
    level: Option<usize>,
    i_max: u32,
) -> Result<()> {
    let p = Payoff::resolve(payoff, ctx.horizon()).expect("validated payoff");
    let tree = ScenarioTree::with_defaults(&ctx.u, &ctx.partition)?;
    let s = level.unwrap_or(tree.depth() / 2);
    let x = tree.cylinder_leaf_values(&p.cylinder())?;
    let tol = ctx.tol().tree;
    let by_level = approximate_by_simple(&tree, &x, s, tol, i_max, Quantization::EqualMassByLevel)?;
    let by_order = approximate_by_simple(&tree, &x, s, tol, i_max, Quantization::Lexicographic)?;
    let exact = conditional_value(&tree, &p.cylinder(), ctx.partition.times()[s])?;
    let prefix = format!("approximation.{}", p.name);
    ctx.flag(
        format!("{prefix}.l1_nonincreasing"),
        Anchor::LimitExtension,
        by_level.monotone(),
    );
    ctx.flag(
        format!("{prefix}.converged"),
        Anchor::LimitExtension,
        by_level.converged,
    );
    ctx.row(
        format!("{prefix}.limit_gap"),
        Anchor::LimitExtension,
        Relation::AtMost,
        max_gap(last_conditional(&by_level), &exact),
        0.0,
        tol,
    );
    ctx.row(
        format!("{prefix}.scheme_gap"),
        Anchor::LimitExtension,
        Relation::AtMost,
        max_gap(last_conditional(&by_level), last_conditional(&by_order)),
        0.0,
        tol,
    );
    Ok(())
}

pub fn oracle(
    ctx: &mut Ctx<'_>,
    payoff: &PayoffRef,
    observed: &[f64],
    steps: usize,
    dx: f64,
) -> Result<()> {
    let t = ctx.horizon();
    let p = Payoff::resolve(payoff, t).expect("validated payoff");
    let lattice = Lattice::new(&ctx.u, &Partition::uniform(t, steps)?)?;
    let grid = Grid1D::standard(&ctx.u, t, dx)?;
    let cyl = p.cylinder();
    let tol = ctx.tol().cross_oracle;
    for (i, &x) in observed.iter().enumerate() {
        let b = (x / lattice.spacing()).round() * lattice.spacing();
        let tree = lattice.conditional(&cyl, steps / 2, &[b], b)?;
        let psi = conditional_psi(&p.terminal(), &p.times, 1, &[b], &ctx.u, &grid)?;
        ctx.row(
            format!("conditional_oracle.{}.obs{i}", p.name),
            Anchor::ConditionalPsi,
            Relation::AbsDiff,
            tree,
            psi,
            tol,
        );
    }
    Ok(())
}
