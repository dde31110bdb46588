//! Node-wise conditional moment bounds for the time and
//! quadratic-variation integrals on a scenario tree.

use crate::error::{invalid, Error, Result};
use crate::ito::integral::{integrate, Integrator};
use crate::ito::process::SimpleProcess;
use crate::scalar::Scalar;
use crate::sublinear::path::PathView;
use crate::sublinear::tree::{NodeFunction, ScenarioTree};

/// Node-wise sides of
/// `E_s[|int_s^t eta du|^2] <= (t - s) E_s[int_s^t eta^2 du]` and
/// `E_s[|int_s^t eta d<B>|^2] <= sigma_hi^4 (t - s) E_s[int_s^t eta^2 du]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentBoundsReport<T> {
    pub time_lhs: NodeFunction<T>,
    pub time_rhs: NodeFunction<T>,
    pub qv_lhs: NodeFunction<T>,
    pub qv_rhs: NodeFunction<T>,
    /// `max(lhs - rhs, 0)` over the nodes, time integral.
    pub time_violation: T,
    /// `max(lhs - rhs, 0)` over the nodes, quadratic-variation integral.
    pub qv_violation: T,
}

fn violation<T: Scalar>(lhs: &NodeFunction<T>, rhs: &NodeFunction<T>) -> T {
    lhs.values
        .iter()
        .zip(&rhs.values)
        .map(|(&l, &r)| (l - r).pos_part())
        .fold(T::zero(), T::max)
}

/// Evaluates both bounds between grid levels `s < t` of `tree`.
pub fn conditional_moment_bounds<T: Scalar>(
    eta: &SimpleProcess<T>,
    tree: &ScenarioTree<T>,
    s: usize,
    t: usize,
) -> Result<MomentBoundsReport<T>> {
    if !(s < t && t <= tree.depth()) {
        return invalid("levels must satisfy s < t <= N");
    }
    if tree.dim() != 1 {
        return invalid("moment bounds are one-dimensional");
    }
    let sigma_hi = tree
        .uncertainty()
        .interval_bounds()
        .map(|(_, hi)| hi)
        .ok_or_else(|| Error::InvalidArgument("interval uncertainty required".into()))?;
    let times = tree.partition().times();
    let span = times[t] - times[s];
    let sq = eta.map(|x| x * x);

    eta.partition().embed_in(tree.partition())?;
    let on = |proc: &SimpleProcess<T>, integrator, p: &PathView<'_, T>| {
        let r = integrate(proc, p, integrator).expect("process grid embeds in the tree grid");
        r.at(t) - r.at(s)
    };
    let dt_int = tree.level_values(t, |p| on(eta, Integrator::Time, p));
    let qv_int = tree.level_values(t, |p| on(eta, Integrator::Covariation(0, 0), p));
    let sq_int = tree.level_values(t, |p| on(&sq, Integrator::Time, p));

    let time_lhs = tree.conditional(&dt_int.map(|x| x * x), s)?;
    let qv_lhs = tree.conditional(&qv_int.map(|x| x * x), s)?;
    let base = tree.conditional(&sq_int, s)?;
    let time_rhs = base.map(|x| span * x);
    let s4 = sigma_hi.powi(4);
    let qv_rhs = base.map(|x| s4 * span * x);
    Ok(MomentBoundsReport {
        time_violation: violation(&time_lhs, &time_rhs),
        qv_violation: violation(&qv_lhs, &qv_rhs),
        time_lhs,
        time_rhs,
        qv_lhs,
        qv_rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sublinear::partition::Partition;
    use crate::sublinear::uncertainty::UncertaintySet;

    fn tree() -> ScenarioTree<f64> {
        let u = UncertaintySet::interval(0.5, 1.0).unwrap();
        ScenarioTree::with_defaults(&u, &Partition::uniform(1.0, 5).unwrap()).unwrap()
    }

    #[test]
    fn constants_are_tight() {
        let t = tree();
        let eta = SimpleProcess::constant(t.partition(), 1.5);
        let r = conditional_moment_bounds(&eta, &t, 1, 4).unwrap();
        let span: f64 = 0.6;
        for (l, rr) in r.time_lhs.values.iter().zip(&r.time_rhs.values) {
            assert!((l - 2.25 * span * span).abs() < 1e-12);
            assert!((rr - 2.25 * span * span).abs() < 1e-12);
        }
        let one = SimpleProcess::constant(t.partition(), 1.0);
        let r = conditional_moment_bounds(&one, &t, 1, 4).unwrap();
        for (l, rr) in r.qv_lhs.values.iter().zip(&r.qv_rhs.values) {
            assert!((l - span * span).abs() < 1e-12);
            assert!((rr - span * span).abs() < 1e-12);
        }
    }

    #[test]
    fn random_process_has_no_violation() {
        let t = tree();
        let eta = SimpleProcess::adapted(t.partition(), |k, p: &PathView<'_, f64>| {
            (p.b1(p.last()) * 3.0 + k as f64).sin() * 2.0
        });
        let r = conditional_moment_bounds(&eta, &t, 0, 5).unwrap();
        assert!(r.time_violation <= 1e-9 && r.qv_violation <= 1e-9);
        assert!(conditional_moment_bounds(&eta, &t, 3, 3).is_err());
    }
}
