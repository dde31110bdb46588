//! Bochner, Itô and quadratic-variation integrals of simple processes.
//!
//! All sums run over the steps of the path grid with the coefficient of the
//! process step that contains each path step (left endpoint), in index
//! order.

use crate::error::{invalid, Result};
use crate::ito::process::SimpleProcess;
use crate::ito::stopping::{grid_stopping_time, StoppingTime};
use crate::scalar::{Scalar, Vec2};
use crate::sublinear::partition::Partition;
use crate::sublinear::path::PathView;
use crate::sublinear::simulate::{map_paths, mean_and_se, ControlRule, PathBundle, SimGrid};
use crate::sublinear::tree::ScenarioTree;
use crate::sublinear::uncertainty::UncertaintySet;

/// What the process is integrated against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrator<T> {
    Time,
    /// `dB^c`.
    Brownian(usize),
    /// `d<B^p, B^q>`.
    Covariation(usize, usize),
    /// `dB^a` with `B^a = a . B`.
    BrownianDirection(Vec2<T>),
    /// `d<B^a>` with `<B^a> = a^T <B> a`.
    CovariationDirection(Vec2<T>),
}

impl<T: Scalar> Integrator<T> {
    /// Increment of the integrator over path step `k`.
    pub fn increment(&self, path: &PathView<'_, T>, k: usize) -> T {
        match *self {
            Self::Time => path.time(k + 1) - path.time(k),
            Self::Brownian(c) => path.db(k, c),
            Self::Covariation(p, q) => path.dqv(k, p, q),
            Self::BrownianDirection(a) => a[0] * path.db(k, 0) + a[1] * path.db(k, 1),
            Self::CovariationDirection(a) => {
                a[0] * a[0] * path.dqv(k, 0, 0)
                    + (a[0] * a[1] + a[0] * a[1]) * path.dqv(k, 0, 1)
                    + a[1] * a[1] * path.dqv(k, 1, 1)
            }
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        let ok = match *self {
            Self::Time => true,
            Self::Brownian(c) => c < dim,
            Self::Covariation(p, q) => p < dim && q < dim,
            Self::BrownianDirection(_) | Self::CovariationDirection(_) => dim == 2,
        };
        if ok {
            Ok(())
        } else {
            invalid("integrator component does not exist in this dimension")
        }
    }
}

/// Cumulative integral of one path at every path grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralResult<T> {
    pub times: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Scalar> IntegralResult<T> {
    pub fn terminal(&self) -> T {
        *self.values.last().expect("at least the time-0 value")
    }

    /// Value at path grid index `j`.
    pub fn at(&self, j: usize) -> T {
        self.values[j]
    }

    /// Largest absolute increment between consecutive grid times.
    pub fn max_increment(&self) -> T {
        self.values
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(T::zero(), T::max)
    }
}

/// `int_0^t eta d(integrator)` at every grid time of `path`.
pub fn integrate<T: Scalar>(
    eta: &SimpleProcess<T>,
    path: &PathView<'_, T>,
    integrator: Integrator<T>,
) -> Result<IntegralResult<T>> {
    integrator.check(path.dim())?;
    let bound = eta.bind(path)?;
    let mut values = Vec::with_capacity(path.len());
    let mut acc = T::zero();
    values.push(acc);
    for j in 0..bound.path_steps() {
        acc += bound.value(j) * integrator.increment(path, j);
        values.push(acc);
    }
    Ok(IntegralResult {
        times: path.times.to_vec(),
        values,
    })
}

/// `int_0^T eta_t dt`.
pub fn bochner_integral<T: Scalar>(eta: &SimpleProcess<T>, path: &PathView<'_, T>) -> Result<T> {
    Ok(integrate(eta, path, Integrator::Time)?.terminal())
}

/// `int_0^t eta dB` (first component).
pub fn ito_integral<T: Scalar>(
    eta: &SimpleProcess<T>,
    path: &PathView<'_, T>,
) -> Result<IntegralResult<T>> {
    integrate(eta, path, Integrator::Brownian(0))
}

/// `int_0^t eta d<B>` (first component).
pub fn qv_integral<T: Scalar>(
    eta: &SimpleProcess<T>,
    path: &PathView<'_, T>,
) -> Result<IntegralResult<T>> {
    integrate(eta, path, Integrator::Covariation(0, 0))
}

/// Both sides of `int_0^{t ^ tau} eta dB = int_0^t 1_{[0, tau]} eta dB`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppedIntegral<T> {
    pub stopped: T,
    pub truncated: T,
}

impl<T: Scalar> StoppedIntegral<T> {
    pub fn gap(&self) -> T {
        (self.stopped - self.truncated).abs()
    }
}

/// Evaluates the stopped integral directly and through the truncated
/// integrand; `t` must be a path grid time.
pub fn stopped_integral<T: Scalar>(
    eta: &SimpleProcess<T>,
    tau: &StoppingTime<T>,
    path: &PathView<'_, T>,
    t: T,
    integrator: Integrator<T>,
) -> Result<StoppedIntegral<T>> {
    let tol = T::lit(1e-12) * (T::one() + t.abs());
    let Some(jt) = (0..path.len()).find(|&j| (path.time(j) - t).abs() <= tol) else {
        return invalid(format!("time {t} is not a path grid point"));
    };
    let js = tau.first_index(path).map_or(jt, |j| j.min(jt));
    let direct = integrate(eta, path, integrator)?;
    let truncated = integrate(&eta.truncate(tau), path, integrator)?;
    Ok(StoppedIntegral {
        stopped: direct.at(js),
        truncated: truncated.at(jt),
    })
}

/// Supported norm exponents.
pub const NORM_EXPONENTS: [u32; 4] = [1, 2, 4, 8];

fn check_exponent(p: u32) -> Result<()> {
    if NORM_EXPONENTS.contains(&p) {
        Ok(())
    } else {
        invalid(format!("unsupported norm exponent p = {p}"))
    }
}

/// `(E[int_0^T |eta_t|^p dt])^{1/p}` on the tree.
pub fn mp_norm<T: Scalar>(eta: &SimpleProcess<T>, p: u32, tree: &ScenarioTree<T>) -> Result<T> {
    check_exponent(p)?;
    eta.partition().embed_in(tree.partition())?;
    let powered = eta.map(move |x| x.abs().powi(p as i32));
    let leaf = tree.leaf_values(|path| {
        bochner_integral(&powered, path).expect("process grid embeds in the tree grid")
    });
    Ok(tree
        .expect(&leaf)?
        .powf(T::one() / T::from_usize_lossy(p as usize)))
}

/// Monte-Carlo `M^p` norm over a panel of bundles (one per control rule):
/// the largest sample mean of `int |eta|^p dt`, to the power `1/p`, with the
/// standard error of that mean.
pub fn mp_norm_mc<T: Scalar>(
    eta: &SimpleProcess<T>,
    p: u32,
    bundles: &[PathBundle<T>],
) -> Result<(T, T)> {
    check_exponent(p)?;
    if bundles.is_empty() {
        return invalid("at least one bundle is required");
    }
    let powered = eta.map(move |x| x.abs().powi(p as i32));
    let mut best = (T::neg_infinity(), T::zero());
    for bundle in bundles {
        let vals = (0..bundle.len())
            .map(|i| bochner_integral(&powered, &bundle.view(i)))
            .collect::<Result<Vec<T>>>()?;
        let (m, se) = mean_and_se(&vals);
        if m > best.0 {
            best = (m, se);
        }
    }
    Ok((
        best.0.powf(T::one() / T::from_usize_lossy(p as usize)),
        best.1,
    ))
}

/// Sample mean and standard error of
/// `int_0^T |eta|^p |1_{[0, tau_n]} - 1_{[0, tau]}| dt` for `tau_n` the
/// rounding of `tau` up to each of `grids`, on paths simulated on `sim`
/// and discarded after use. `tau` is read at the resolution of `sim`.
#[allow(clippy::too_many_arguments)]
pub fn truncation_gap_moments<T: Scalar, R: ControlRule<T>>(
    eta: &SimpleProcess<T>,
    tau: &StoppingTime<T>,
    grids: &[Partition<T>],
    p: u32,
    uncertainty: &UncertaintySet<T>,
    rule: &R,
    sim: &SimGrid<T>,
    paths: usize,
    seed: u64,
) -> Result<Vec<(T, T)>> {
    check_exponent(p)?;
    if paths == 0 {
        return invalid("path count must be at least 1");
    }
    eta.partition().embed_in(sim.partition())?;
    for g in grids {
        g.embed_in(sim.partition())?;
    }
    let exact = eta.truncate(tau);
    let gaps = grids
        .iter()
        .map(|g| {
            let rounded = eta.truncate(&grid_stopping_time(tau, g));
            rounded
                .axpy(-T::one(), &exact)
                .map(|d| d.map(move |x| x.abs().powi(p as i32)))
        })
        .collect::<Result<Vec<_>>>()?;
    let per_path = map_paths(uncertainty, rule, sim, seed, 0, paths, |path| {
        gaps.iter()
            .map(|g| bochner_integral(g, &path.view()).expect("grids embed in the simulation grid"))
            .collect::<Vec<T>>()
    })?;
    Ok((0..grids.len())
        .map(|k| {
            let col: Vec<T> = per_path.iter().map(|v| v[k]).collect();
            mean_and_se(&col)
        })
        .collect())
}
