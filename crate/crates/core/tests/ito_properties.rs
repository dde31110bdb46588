use gstoch_core::formula::{
    build_path, localize, path_both_sides, path_both_sides_stopped, CoefficientTriple, TestFunction,
};
use gstoch_core::ito::{
    bochner_integral, integrate, ito_integral, qv_integral, stopped_integral, Integrator,
    SimpleProcess, StoppingTime,
};
use gstoch_core::sublinear::{
    simulate_paths, NodeFunction, Partition, PathBundle, PolicyRule, ScenarioTree, SimGrid,
    UncertaintySet,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

fn random_nodes(tree: &ScenarioTree<f64>, seed: u64) -> SimpleProcess<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = (0..tree.depth())
        .map(|k| {
            NodeFunction::new(
                k,
                (0..tree.level_size(k))
                    .map(|_| rng.random_range(-2.0..2.0))
                    .collect(),
            )
        })
        .collect();
    SimpleProcess::from_nodes(tree.partition(), nodes).unwrap()
}

fn bundle(lo: f64, hi: f64, steps: usize, paths: usize, seed: u64) -> PathBundle<f64> {
    let u = UncertaintySet::interval(lo, hi).unwrap();
    let rule = PolicyRule::named("random_switching", &u, seed).unwrap();
    simulate_paths(
        &u,
        &rule,
        &SimGrid::new(&Partition::uniform(1.0, steps).unwrap()),
        paths,
        seed,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn tree_integral_identities(lo in 0.1f64..1.0, spread in 0.0f64..1.0, depth in 1usize..5, seed in any::<u64>()) {
        let hi = lo + spread;
        let u = UncertaintySet::interval(lo, hi).unwrap();
        let tree = ScenarioTree::with_defaults(&u, &Partition::uniform(1.0, depth).unwrap()).unwrap();
        let eta = random_nodes(&tree, seed);
        let i = tree.leaf_values(|p| ito_integral(&eta, p).unwrap().terminal());
        prop_assert!(tree.expect(&i).unwrap().abs() <= TOL);
        prop_assert!(tree.expect(&i.map(|v| -v)).unwrap().abs() <= TOL);
        let sq = tree.expect(&i.map(|v| v * v)).unwrap();
        let eta2 = eta.map(|v| v * v);
        let time = tree.expect(&tree.leaf_values(|p| bochner_integral(&eta2, p).unwrap())).unwrap();
        let qv = tree.expect(&tree.leaf_values(|p| qv_integral(&eta2, p).unwrap().terminal())).unwrap();
        prop_assert!(sq <= hi * hi * time + TOL);
        prop_assert!((sq - qv).abs() <= TOL * (1.0 + sq.abs()));
        prop_assert!(qv <= hi * hi * time + TOL);
    }

    #[test]
    fn integrals_are_linear_pathwise(lo in 0.1f64..1.0, spread in 0.0f64..1.0, steps in 1usize..30, seed in any::<u64>(), a in -2.0f64..2.0, c in -2.0f64..2.0) {
        let b = bundle(lo, lo + spread, steps, 4, seed);
        let grid = b.partition.clone();
        let first = SimpleProcess::brownian(&grid, 0).map(|x| x.sin());
        let second = SimpleProcess::adapted(&grid, |_, p| p.qv1(p.last()));
        let combined = first.axpy(a, &second).unwrap();
        for i in 0..b.len() {
            let v = b.view(i);
            for integrator in [Integrator::Brownian(0), Integrator::Covariation(0, 0), Integrator::Time] {
                let x = integrate(&first, &v, integrator).unwrap();
                let y = integrate(&second, &v, integrator).unwrap();
                let z = integrate(&combined, &v, integrator).unwrap();
                for j in 0..v.len() {
                    prop_assert!((z.at(j) - a * x.at(j) - y.at(j)).abs() <= 1e-12);
                }
            }
            let constant = integrate(&SimpleProcess::constant(&grid, c), &v, Integrator::Brownian(0)).unwrap();
            prop_assert!((constant.terminal() - c * v.b1(v.last())).abs() <= 1e-12);
        }
    }

    #[test]
    fn stopped_integral_equals_truncated_integral(
        lo in 0.1f64..1.0, spread in 0.0f64..1.0, steps in 2usize..40, seed in any::<u64>(), level in 0.05f64..1.5, rule in 0usize..3,
    ) {
        let b = bundle(lo, lo + spread, steps, 16, seed);
        let tau = match rule {
            0 => StoppingTime::first_exit(level),
            1 => StoppingTime::predicate(move |p| p.qv1(p.last()) >= level * 0.5),
            _ => StoppingTime::first_exit(level).either(StoppingTime::at(0.5)),
        };
        let eta = SimpleProcess::brownian(&b.partition, 0).map(|x| 1.0 + x * x);
        for i in 0..b.len() {
            let s = stopped_integral(&eta, &tau, &b.view(i), 1.0, Integrator::Brownian(0)).unwrap();
            prop_assert!(s.gap() <= 1e-15);
        }
    }

    #[test]
    fn affine_test_functions_have_no_residual(
        lo in 0.1f64..1.0, spread in 0.0f64..1.0, steps in 1usize..40, seed in any::<u64>(),
        c in -2.0f64..2.0, ta in -2.0f64..2.0, slope in -2.0f64..2.0,
        alpha in -1.0f64..1.0, eta in -1.0f64..1.0, beta in -1.0f64..1.0, x0 in -1.0f64..1.0,
    ) {
        let b = bundle(lo, lo + spread, steps, 4, seed);
        let phi = TestFunction::affine(c, ta, &[slope]).unwrap();
        let coeffs = CoefficientTriple::constant(1, 1, &[alpha], &[eta], &[beta]).unwrap();
        for i in 0..b.len() {
            let v = b.view(i);
            let xp = build_path(&[x0], &coeffs, &v).unwrap();
            let r = path_both_sides(&phi, &xp, &v, 0, steps).unwrap();
            prop_assert!(r.residual().abs() <= 1e-12);
        }
    }

    #[test]
    fn localized_paths_match_stopped_paths(lo in 0.1f64..1.0, spread in 0.0f64..1.0, seed in any::<u64>(), k in 0.5f64..20.0) {
        let b = bundle(lo, lo + spread, 32, 16, seed);
        let coeffs = CoefficientTriple::constant(1, 1, &[0.3], &[0.2], &[1.0]).unwrap();
        let phi = TestFunction::scalar(
            gstoch_core::formula::Smoothness::General,
            |_, x: f64| x * x * x,
            |_, _| 0.0,
            |_, x| 3.0 * x * x,
            |_, x| 6.0 * x,
        );
        let loc = localize(&coeffs, &[0.1], &b, k).unwrap();
        for i in 0..b.len() {
            let v = b.view(i);
            let full = build_path(&[0.1], &coeffs, &v).unwrap();
            let cut = build_path(&[0.1], &loc.truncated, &v).unwrap();
            let a = path_both_sides(&phi, &cut, &v, 0, 32).unwrap();
            let s = path_both_sides_stopped(&phi, &full, &v, 0, 32, loc.stop_indices[i]).unwrap();
            prop_assert!((a.lhs - s.lhs).abs() <= 1e-12 && (a.rhs - s.rhs).abs() <= 1e-12);
        }
    }
}
