//! Itô processes and the Itô formula for `G`-Brownian motion, evaluated
//! pathwise with left-endpoint sums.

pub mod both_sides;
pub mod cases;
pub mod convergence;
pub mod localize;
pub mod process;
pub mod test_function;

pub use both_sides::{
    ito_both_sides, ito_both_sides_stopped, path_both_sides, path_both_sides_stopped, BothSides,
};
pub use cases::{builtin_case, AFFINE_CASES, CASE_NAMES, CONVERGENCE_PANEL};
pub use convergence::{
    fitted_slope, panel_rule, residual_convergence, ControlSeries, ConvergenceConfig,
    ConvergenceTable, CurvatureFeedback, PanelControl, PanelRule, ResidualRow,
};
pub use localize::{
    gamma_values, localize, localize_with, localizing_time, GammaForm, Localization,
};
pub use process::{
    build_path, build_process, frozen_coefficient_values, Coefficient, CoefficientTriple,
    Integrability, ItoPath, ItoProcess,
};
pub use test_function::{Smoothness, TestFunction, MAX_STATE_DIM};

/// A test function with the process it is applied to.
#[derive(Debug, Clone)]
pub struct ItoCase<T> {
    pub name: String,
    pub phi: TestFunction<T>,
    pub coeffs: process::CoefficientTriple<T>,
    pub x0: Vec<T>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ito::process::SimpleProcess;
    use crate::scalar::Scalar;
    use crate::sublinear::partition::Partition;
    use crate::sublinear::path::PathView;
    use crate::sublinear::simulate::{simulate_paths, PolicyRule, SimGrid};
    use crate::sublinear::uncertainty::UncertaintySet;

    #[test]
    fn all_cases_pass_the_derivative_check() {
        for name in CASE_NAMES {
            let case = builtin_case::<f64>(name).unwrap();
            case.phi.verify().unwrap();
        }
        assert!(builtin_case::<f64>("nope").is_err());
        builtin_case::<f32>("cubic_state").unwrap();
    }

    #[test]
    fn frozen_coefficients_match_one_step_simple_coefficients() {
        let u = UncertaintySet::interval(0.5, 1.0).unwrap();
        let rule = PolicyRule::named("random_switching", &u, 4).unwrap();
        let grid = Partition::uniform(1.0, 32).unwrap();
        let b = simulate_paths(&u, &rule, &SimGrid::new(&grid), 50, 8).unwrap();
        let steps = Partition::from_times(vec![0.0, 0.25, 0.75, 1.0]).unwrap();
        let at_s = |f: fn(f64) -> f64| {
            Coefficient::Process(SimpleProcess::adapted(
                &steps,
                move |k, p: &PathView<'_, f64>| {
                    if k == 1 {
                        f(p.b1(p.last()))
                    } else {
                        0.0
                    }
                },
            ))
        };
        let c = CoefficientTriple::zero(1, 1)
            .unwrap()
            .with_alpha(0, at_s(|b| b.cos()))
            .with_eta(0, 0, 0, at_s(|b| 0.5 + b * b))
            .with_beta(0, 0, at_s(|b| 1.0 - b));
        let x = build_process(&[0.4], &c, &b).unwrap();
        for (xp, path) in x.paths.iter().zip(&b.paths) {
            let v = path.view();
            let bs = v.b1(8);
            let frozen = frozen_coefficient_values(
                &[0.4],
                8,
                &[bs.cos()],
                &[0.5 + bs * bs],
                &[1.0 - bs],
                &v,
            )
            .unwrap();
            for (off, val) in frozen.iter().enumerate().take(24 - 8 + 1) {
                assert!((xp.x(8 + off)[0] - val[0]).abs() < 1e-12);
            }
            let phi = builtin_case::<f64>("cos_state").unwrap().phi;
            let a = path_both_sides(&phi, xp, &v, 8, 24).unwrap();
            let direct_lhs = phi.value(0.75, &frozen[16]) - phi.value(0.25, &frozen[0]);
            assert!((a.lhs - direct_lhs).abs() < 1e-12);
        }
    }

    fn component_path(v: &PathView<'_, f64>, c: usize) -> (Vec<f64>, Vec<f64>) {
        let b = (0..v.len()).map(|j| v.b(j, c)).collect();
        let q = (0..v.len()).map(|j| v.qv(j, c, c)).collect();
        (b, q)
    }

    #[test]
    fn decoupled_two_dimensional_case_splits() {
        let theta = vec![
            [[0.25, 0.0], [0.0, 1.0]],
            [[1.0, 0.0], [0.0, 0.25]],
            [[0.5, 0.0], [0.0, 0.5]],
        ];
        let u = UncertaintySet::covariances(theta).unwrap();
        let rule = PolicyRule::named("random_switching", &u, 2).unwrap();
        let grid = Partition::uniform(1.0, 64).unwrap();
        let b = simulate_paths(&u, &rule, &SimGrid::new(&grid), 40, 3).unwrap();
        let case = builtin_case::<f64>("decoupled_2d").unwrap();
        let x = build_process(&case.x0, &case.coeffs, &b).unwrap();

        let first = builtin_case::<f64>("sin_exp_constant").unwrap().phi;
        let second = TestFunction::scalar(
            Smoothness::General,
            |_, x| x * x,
            |_, _| 0.0,
            |_, x| 2.0 * x,
            |_, _| 2.0,
        );
        let c1 = CoefficientTriple::zero(1, 1)
            .unwrap()
            .with_alpha(0, Coefficient::state(|_, x: &[f64]| -x[0]))
            .with_eta(0, 0, 0, Coefficient::Constant(0.3))
            .with_beta(
                0,
                0,
                Coefficient::state(|_, x: &[f64]| 1.0 + 0.5 * x[0].sin()),
            );
        let c2 = CoefficientTriple::zero(1, 1)
            .unwrap()
            .with_alpha(0, Coefficient::Constant(0.2))
            .with_eta(0, 0, 0, Coefficient::state(|t, x: &[f64]| (x[0] + t).cos()))
            .with_beta(0, 0, Coefficient::Constant(0.7));
        for (xp, path) in x.paths.iter().zip(&b.paths) {
            let v = path.view();
            let both = path_both_sides(&case.phi, xp, &v, 0, 64).unwrap();
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            for (c, (phi, coeffs)) in [(&first, &c1), (&second, &c2)].into_iter().enumerate() {
                let (bc, qc) = component_path(&v, c);
                let v1 = PathView::new(&path.times, 1, &bc, &qc);
                let x1 = build_path(&[case.x0[c]], coeffs, &v1).unwrap();
                for j in 0..v.len() {
                    assert!((x1.x(j)[0] - xp.x(j)[c]).abs() < 1e-12);
                }
                let s = path_both_sides(phi, &x1, &v1, 0, 64).unwrap();
                lhs += s.lhs;
                rhs += s.rhs;
            }
            assert!((both.lhs - lhs).abs() < 1e-12 && (both.rhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn generic_over_f32() {
        let case = builtin_case::<f32>("sin_exp_constant").unwrap();
        let u = UncertaintySet::<f32>::interval(0.5, 1.0).unwrap();
        let cfg = ConvergenceConfig {
            mesh_steps: vec![8, 16, 32],
            controls: vec![PanelControl::High],
            ..ConvergenceConfig::standard(200, 1)
        };
        let t = residual_convergence(&case, &u, &cfg).unwrap();
        assert!(t.max_l2().is_finite() && t.max_l2() > f32::lit(0.0));
    }
}
