use gstoch_core::sublinear::{
    capacity, simulate_paths, NodeFunction, Partition, PolicyRule, ScenarioTree, SimGrid,
    UncertaintySet,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

fn tree(lo: f64, hi: f64, depth: usize) -> ScenarioTree<f64> {
    let u = UncertaintySet::interval(lo, hi).unwrap();
    ScenarioTree::with_defaults(&u, &Partition::uniform(1.0, depth).unwrap()).unwrap()
}

fn random_level(tree: &ScenarioTree<f64>, level: usize, rng: &mut ChaCha8Rng) -> NodeFunction<f64> {
    NodeFunction::new(
        level,
        (0..tree.level_size(level))
            .map(|_| rng.random_range(-2.0..2.0))
            .collect(),
    )
}

fn add(a: &NodeFunction<f64>, b: &NodeFunction<f64>) -> NodeFunction<f64> {
    a.zip_with(b, |x, y| x + y).unwrap()
}

prop_compose! {
    fn setting()(lo in 0.1f64..1.0, spread in 0.0f64..1.0, depth in 1usize..5, seed in any::<u64>())
        -> (f64, f64, usize, u64) {
        (lo, lo + spread, depth, seed)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn upper_expectation_is_sublinear((lo, hi, depth, seed) in setting(), lambda in 0.0f64..5.0, c in -3.0f64..3.0) {
        let t = tree(lo, hi, depth);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_level(&t, depth, &mut rng);
        let y = random_level(&t, depth, &mut rng);
        let ex = t.expect(&x).unwrap();
        let ey = t.expect(&y).unwrap();
        prop_assert!(t.expect(&add(&x, &y)).unwrap() <= ex + ey + TOL);
        prop_assert!((t.expect(&x.map(|v| lambda * v)).unwrap() - lambda * ex).abs() <= TOL);
        let dominating = x.zip_with(&y, |a, b| a + b.abs()).unwrap();
        prop_assert!(t.expect(&dominating).unwrap() >= ex - TOL);
        prop_assert!((t.expect(&x.map(|_| c)).unwrap() - c).abs() <= TOL);
        prop_assert!((t.expect(&x.map(|v| v + c)).unwrap() - ex - c).abs() <= TOL);
    }

    #[test]
    fn tower_and_mean_preservation((lo, hi, depth, seed) in setting(), a in 0usize..5, b in 0usize..5) {
        let t = tree(lo, hi, depth);
        let (s, r) = (a.min(depth), b.min(depth));
        let x = random_level(&t, depth, &mut ChaCha8Rng::seed_from_u64(seed));
        let inner = t.conditional(&x, r).unwrap();
        let outer = t.conditional(&inner, s).unwrap();
        let direct = t.conditional(&x, s.min(r)).unwrap();
        let direct = t.lift(&direct, outer.level).unwrap();
        prop_assert!(outer.max_abs_diff(&direct) <= 1e-12);
        prop_assert!((t.expect(&t.conditional(&x, s).unwrap()).unwrap() - t.expect(&x).unwrap()).abs() <= TOL);
    }

    #[test]
    fn measurable_multipliers_split_by_sign((lo, hi, depth, seed) in setting(), s in 0usize..5) {
        let t = tree(lo, hi, depth);
        let s = s.min(depth);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_level(&t, depth, &mut rng);
        let eta = random_level(&t, s, &mut rng);
        let eta_leaf = t.lift(&eta, depth).unwrap();
        let product = eta_leaf.zip_with(&x, |e, v| e * v).unwrap();
        let lhs = t.conditional(&product, s).unwrap();
        let up = t.conditional(&x, s).unwrap();
        let down = t.conditional(&x.map(|v| -v), s).unwrap();
        for i in 0..lhs.values.len() {
            let e = eta.values[i];
            let rhs = e.max(0.0) * up.values[i] + (-e).max(0.0) * down.values[i];
            prop_assert!((lhs.values[i] - rhs).abs() <= TOL);
        }
        let shifted = add(&x, &eta_leaf);
        let cs = t.conditional(&shifted, s).unwrap();
        for i in 0..cs.values.len() {
            prop_assert!((cs.values[i] - up.values[i] - eta.values[i]).abs() <= TOL);
        }
    }

    #[test]
    fn capacity_is_a_subadditive_probability_bound((lo, hi, depth, _seed) in setting(), a in -2.0f64..2.0, q in 0.0f64..2.0) {
        let t = tree(lo, hi, depth);
        let above = |p: &gstoch_core::sublinear::PathView<'_, f64>| p.b1(p.last()) > a;
        let spread = |p: &gstoch_core::sublinear::PathView<'_, f64>| p.qv1(p.last()) > q;
        let ca = capacity(&t, above);
        let cb = capacity(&t, spread);
        let cu = capacity(&t, |p| above(p) || spread(p));
        for c in [ca, cb, cu] {
            prop_assert!((-TOL..=1.0 + TOL).contains(&c));
        }
        prop_assert!(cu <= ca + cb + TOL);
        prop_assert!(cu >= ca.max(cb) - TOL);
    }

    #[test]
    fn simulated_quadratic_variation_stays_in_the_envelope(
        lo in 0.1f64..1.0, spread in 0.0f64..1.0, steps in 1usize..40, seed in any::<u64>(),
        rule in prop::sample::select(vec!["sigma_lo", "sigma_hi", "random_switching"]),
    ) {
        let u = UncertaintySet::interval(lo, lo + spread).unwrap();
        let policy = PolicyRule::named(rule, &u, seed).unwrap();
        let grid = Partition::uniform(1.0, steps).unwrap();
        let bundle = simulate_paths(&u, &policy, &SimGrid::new(&grid), 8, seed).unwrap();
        prop_assert!(bundle.check_invariants(&u).is_ok());
        for i in 0..bundle.len() {
            let v = bundle.view(i);
            for k in 0..steps {
                let dt = v.time(k + 1) - v.time(k);
                let dq = v.dqv(k, 0, 0);
                prop_assert!(dq >= lo * lo * dt * (1.0 - 1e-12) && dq <= (lo + spread).powi(2) * dt * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn tree_paths_stay_in_the_envelope((lo, hi, depth, _seed) in setting()) {
        let t = tree(lo, hi, depth);
        let dt = 1.0 / depth as f64;
        for i in 0..t.level_size(depth) {
            for k in 0..depth {
                let a = t.ancestor(depth, i, k);
                let b = t.ancestor(depth, i, k + 1);
                let dq = t.node_qv(k + 1, b, 0, 0) - t.node_qv(k, a, 0, 0);
                prop_assert!(dq >= lo * lo * dt * (1.0 - 1e-12) && dq <= hi * hi * dt * (1.0 + 1e-12));
            }
        }
    }
}
