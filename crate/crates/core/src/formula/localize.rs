//! Localizing stopping times `tau_k = inf{t : gamma_t >= k}`.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::ito::stopping::StoppingTime;
use crate::scalar::Scalar;
use crate::sublinear::path::PathView;
use crate::sublinear::simulate::PathBundle;

use super::process::{fill_path, norm, CoefficientTriple, ItoPath};

/// Integrand of the accumulator part of `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum GammaForm {
    /// `|alpha|^4 + |eta|^4 + |beta|^8`.
    #[default]
    Corrected,
    /// `|beta|^8 + |beta|^4 + |beta|^4`.
    Literal,
}

/// `gamma_j = |X_{t_j}| + sum_{i < j} g(alpha_i, eta_i, beta_i) dt_i` on every grid point.
pub fn gamma_values<T: Scalar>(xp: &ItoPath<T>, path: &PathView<'_, T>, form: GammaForm) -> Vec<T> {
    let mut acc = T::zero();
    let mut out = Vec::with_capacity(xp.len());
    for j in 0..xp.len() {
        out.push(norm(xp.x(j)) + acc);
        if j + 1 < xp.len() {
            let b = norm(xp.beta(j));
            let g = match form {
                GammaForm::Corrected => {
                    norm(xp.alpha(j)).powi(4) + norm(xp.eta(j)).powi(4) + b.powi(8)
                }
                GammaForm::Literal => b.powi(8) + T::lit(2.0) * b.powi(4),
            };
            acc += g * (path.time(j + 1) - path.time(j));
        }
    }
    out
}

/// `tau_k` for the process started at `x0`. Paths the coefficients cannot
/// be evaluated on stop at time 0.
pub fn localizing_time<T: Scalar>(
    coeffs: &CoefficientTriple<T>,
    x0: &[T],
    k: T,
    form: GammaForm,
) -> StoppingTime<T> {
    let coeffs = coeffs.untruncated();
    let x0 = x0.to_vec();
    StoppingTime::scan(move |path| match fill_path(&x0, &coeffs, path) {
        Ok(xp) => gamma_values(&xp, path, form).iter().position(|&g| !(g < k)),
        Err(_) => Some(0),
    })
}

/// `tau_k`, the truncated coefficients `1_{[0, tau_k]} (alpha, eta, beta)`
/// and the stopping index on every path of the bundle.
#[derive(Debug, Clone)]
pub struct Localization<T> {
    pub level: T,
    pub tau: StoppingTime<T>,
    pub truncated: CoefficientTriple<T>,
    pub stop_indices: Vec<Option<usize>>,
    /// Fraction of paths with `tau_k = T`.
    pub coverage: T,
}

pub fn localize<T: Scalar>(
    coeffs: &CoefficientTriple<T>,
    x0: &[T],
    bundle: &PathBundle<T>,
    k: T,
) -> Result<Localization<T>> {
    localize_with(coeffs, x0, bundle, k, GammaForm::Corrected)
}

pub fn localize_with<T: Scalar>(
    coeffs: &CoefficientTriple<T>,
    x0: &[T],
    bundle: &PathBundle<T>,
    k: T,
    form: GammaForm,
) -> Result<Localization<T>> {
    if !(k > T::zero()) {
        return invalid("localization level must be positive");
    }
    if bundle.is_empty() {
        return invalid("bundle is empty");
    }
    coeffs.check_grid(&bundle.partition)?;
    fill_path(x0, coeffs, &bundle.view(0).prefix(0))?;
    let tau = localizing_time(coeffs, x0, k, form);
    let stop_indices: Vec<Option<usize>> = (0..bundle.len())
        .into_par_iter()
        .map(|i| tau.first_index(&bundle.view(i)))
        .collect();
    let last = bundle.partition.steps();
    let covered = stop_indices
        .iter()
        .filter(|s| s.is_none_or(|j| j == last))
        .count();
    Ok(Localization {
        level: k,
        truncated: coeffs.untruncated().truncated(&tau),
        tau,
        stop_indices,
        coverage: T::from_usize_lossy(covered) / T::from_usize_lossy(bundle.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::both_sides::{path_both_sides, path_both_sides_stopped};
    use crate::formula::process::{build_path, Coefficient};
    use crate::formula::test_function::{Smoothness, TestFunction};
    use crate::sublinear::partition::Partition;
    use crate::sublinear::simulate::{simulate_paths, PolicyRule, SimGrid};
    use crate::sublinear::uncertainty::UncertaintySet;

    fn bundle(m: usize) -> PathBundle<f64> {
        let u = UncertaintySet::interval(0.5, 1.0).unwrap();
        let rule = PolicyRule::named("random_switching", &u, 1).unwrap();
        simulate_paths(
            &u,
            &rule,
            &SimGrid::new(&Partition::uniform(1.0, 64).unwrap()),
            m,
            9,
        )
        .unwrap()
    }

    fn coeffs() -> CoefficientTriple<f64> {
        CoefficientTriple::zero(1, 1)
            .unwrap()
            .with_alpha(0, Coefficient::state(|_, x: &[f64]| x[0]))
            .with_beta(
                0,
                0,
                Coefficient::state(|_, x: &[f64]| 1.0 + 0.5 * x[0].abs()),
            )
    }

    #[test]
    fn trivial_levels() {
        let b = bundle(50);
        let bounded = CoefficientTriple::constant(1, 1, &[0.1], &[0.2], &[1.0]).unwrap();
        let l = localize(&bounded, &[0.0], &b, 1e12).unwrap();
        assert_eq!(l.coverage, 1.0);
        let l = localize(&bounded, &[0.5], &b, 1e-9).unwrap();
        assert!(l.stop_indices.iter().all(|s| *s == Some(0)));
        assert_eq!(l.coverage, 0.0);
        assert!(localize(&bounded, &[0.5], &b, 0.0).is_err());
    }

    #[test]
    fn monotone_in_level_and_gamma() {
        let b = bundle(200);
        let mut prev: Option<Vec<Option<usize>>> = None;
        let mut prev_cov = -1.0;
        for k in [1.0, 2.0, 4.0, 16.0, 256.0, 1e12] {
            let l = localize(&coeffs(), &[0.2], &b, k).unwrap();
            assert!(l.coverage >= prev_cov);
            prev_cov = l.coverage;
            if let Some(p) = &prev {
                for (a, c) in p.iter().zip(&l.stop_indices) {
                    let (a, c) = (a.unwrap_or(usize::MAX), c.unwrap_or(usize::MAX));
                    assert!(c >= a);
                }
            }
            prev = Some(l.stop_indices);
        }
        assert_eq!(prev_cov, 1.0);
        let v = b.view(0);
        let xp = build_path(&[0.2], &coeffs(), &v).unwrap();
        for form in [GammaForm::Corrected, GammaForm::Literal] {
            let g = gamma_values(&xp, &v, form);
            for j in 0..g.len() {
                let acc = g[j] - xp.x(j)[0].abs();
                let prev = if j == 0 {
                    0.0
                } else {
                    g[j - 1] - xp.x(j - 1)[0].abs()
                };
                assert!(acc >= prev - 1e-12);
            }
        }
    }

    #[test]
    fn truncated_consistency_and_prefix_decidability() {
        let b = bundle(100);
        let l = localize(&coeffs(), &[0.2], &b, 3.0).unwrap();
        let phi = TestFunction::scalar(
            Smoothness::General,
            |_, x: f64| x * x * x,
            |_, _| 0.0,
            |_, x| 3.0 * x * x,
            |_, x| 6.0 * x,
        );
        for i in 0..b.len() {
            let v = b.view(i);
            let full = build_path(&[0.2], &coeffs(), &v).unwrap();
            let cut = build_path(&[0.2], &l.truncated, &v).unwrap();
            assert_eq!(cut.stop(), l.stop_indices[i]);
            let a = path_both_sides(&phi, &cut, &v, 0, 64).unwrap();
            let s = path_both_sides_stopped(&phi, &full, &v, 0, 64, l.stop_indices[i]).unwrap();
            assert!((a.lhs - s.lhs).abs() <= 1e-12 && (a.rhs - s.rhs).abs() <= 1e-12);
            if l.stop_indices[i].is_none() {
                assert_eq!(full.x(64), cut.x(64));
            }
            for j in 0..v.len() {
                assert_eq!(
                    l.tau.stopped_by(&v.prefix(j)),
                    l.stop_indices[i].is_some_and(|s| s <= j)
                );
            }
        }
        let lit = localize_with(&coeffs(), &[0.2], &b, 3.0, GammaForm::Literal).unwrap();
        assert!(lit.coverage >= 0.0 && lit.coverage <= 1.0);
    }
}
