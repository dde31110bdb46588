//! Both sides of the Itô formula along simulated paths.
//!
//! `lhs = phi(t, X_t) - phi(s, X_s)` and `rhs` is the sum of
//! `int (d_t phi + d_nu phi alpha^nu) du`, `int d_nu phi beta^{nu j} dB^j` and
//! `int (d_nu phi eta^{nu ij} + 1/2 d_{mu nu} phi beta^{mu i} beta^{nu j}) d<B^i, B^j>`
//! with every integrand frozen at the left endpoint of each path step.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::ito::stopping::StoppingTime;
use crate::scalar::Scalar;
use crate::sublinear::path::PathView;
use crate::sublinear::simulate::PathBundle;

use super::process::{ItoPath, ItoProcess};
use super::test_function::{TestFunction, MAX_STATE_DIM};

/// The two sides of the formula on one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BothSides<T> {
    pub lhs: T,
    pub rhs: T,
}

impl<T: Scalar> BothSides<T> {
    pub fn residual(&self) -> T {
        self.lhs - self.rhs
    }
}

/// Integrand of `d<B^i, B^k>` at `(t, x)` for the given coefficients.
pub(crate) fn qv_integrand<T: Scalar>(
    phi: &TestFunction<T>,
    t: T,
    x: &[T],
    eta: &[T],
    beta: &[T],
    d: usize,
    i: usize,
    k: usize,
) -> T {
    let n = x.len();
    let half = T::lit(0.5);
    let mut v = T::zero();
    for nu in 0..n {
        let e = eta[(nu * d + i) * d + k];
        if !e.is_zero() {
            v += phi.gradient(t, x, nu) * e;
        }
        for mu in 0..n {
            let bb = beta[mu * d + i] * beta[nu * d + k];
            if !bb.is_zero() {
                v += half * phi.hessian(t, x, mu, nu) * bb;
            }
        }
    }
    v
}

fn step_sum<T: Scalar>(
    phi: &TestFunction<T>,
    xp: &ItoPath<T>,
    path: &PathView<'_, T>,
    j: usize,
) -> T {
    let (n, d) = (xp.state_dim(), xp.noise_dim());
    let t = path.time(j);
    let x = xp.x(j);
    let (alpha, eta, beta) = (xp.alpha(j), xp.eta(j), xp.beta(j));
    let mut grad = [T::zero(); MAX_STATE_DIM];
    for (nu, g) in grad.iter_mut().enumerate().take(n) {
        *g = phi.gradient(t, x, nu);
    }
    let mut dt_part = phi.time_derivative(t, x);
    for nu in 0..n {
        dt_part += grad[nu] * alpha[nu];
    }
    let mut sum = dt_part * (path.time(j + 1) - t);
    for k in 0..d {
        let mut coef = T::zero();
        for nu in 0..n {
            coef += grad[nu] * beta[nu * d + k];
        }
        sum += coef * path.db(j, k);
    }
    for i in 0..d {
        for k in 0..d {
            let dq = path.dqv(j, i, k);
            if !dq.is_zero() {
                sum += qv_integrand(phi, t, x, eta, beta, d, i, k) * dq;
            }
        }
    }
    sum
}

fn check_path<T: Scalar>(
    phi: &TestFunction<T>,
    xp: &ItoPath<T>,
    path: &PathView<'_, T>,
    s: usize,
    t: usize,
) -> Result<()> {
    phi.verify()?;
    if phi.dim() != xp.state_dim() {
        return invalid("test function and process have different state dimensions");
    }
    if xp.len() != path.len() {
        return invalid("process and path have different lengths");
    }
    if !(s <= t && t < path.len()) {
        return invalid(format!("grid indices must satisfy s <= t < {}", path.len()));
    }
    Ok(())
}

/// Both sides between grid indices `s <= t`. When the process carries a
/// truncation index `r`, every integrand is multiplied by `1_{j < r}` and
/// the time argument of `phi` is `t ^ r`.
pub fn path_both_sides<T: Scalar>(
    phi: &TestFunction<T>,
    xp: &ItoPath<T>,
    path: &PathView<'_, T>,
    s: usize,
    t: usize,
) -> Result<BothSides<T>> {
    check_path(phi, xp, path, s, t)?;
    let stop = xp.stop().unwrap_or(usize::MAX);
    let mut rhs = T::zero();
    for j in s..t {
        let active = if j < stop { T::one() } else { T::zero() };
        rhs += active * step_sum(phi, xp, path, j);
    }
    let lhs =
        phi.value(path.time(t.min(stop)), xp.x(t)) - phi.value(path.time(s.min(stop)), xp.x(s));
    Ok(BothSides { lhs, rhs })
}

/// Both sides of the formula for `X` stopped at grid index `stop`:
/// `phi(t ^ r, X_{t ^ r}) - phi(s ^ r, X_{s ^ r})` against the sums over
/// `[s ^ r, t ^ r)`.
pub fn path_both_sides_stopped<T: Scalar>(
    phi: &TestFunction<T>,
    xp: &ItoPath<T>,
    path: &PathView<'_, T>,
    s: usize,
    t: usize,
    stop: Option<usize>,
) -> Result<BothSides<T>> {
    check_path(phi, xp, path, s, t)?;
    let r = stop.unwrap_or(usize::MAX);
    let (a, b) = (s.min(r), t.min(r));
    let rhs = (a..b).fold(T::zero(), |acc, j| acc + step_sum(phi, xp, path, j));
    let lhs = phi.value(path.time(b), xp.x(b)) - phi.value(path.time(a), xp.x(a));
    Ok(BothSides { lhs, rhs })
}

fn indices<T: Scalar>(
    process: &ItoProcess<T>,
    bundle: &PathBundle<T>,
    s: T,
    t: T,
) -> Result<(usize, usize)> {
    if process.len() != bundle.len() || process.partition != bundle.partition {
        return invalid("process was not built on this bundle");
    }
    Ok((
        bundle.partition.require_index(s)?,
        bundle.partition.require_index(t)?,
    ))
}

/// Per-path both sides between grid times `s <= t`.
pub fn ito_both_sides<T: Scalar>(
    phi: &TestFunction<T>,
    process: &ItoProcess<T>,
    bundle: &PathBundle<T>,
    s: T,
    t: T,
) -> Result<Vec<BothSides<T>>> {
    let (si, ti) = indices(process, bundle, s, t)?;
    (0..bundle.len())
        .into_par_iter()
        .map(|i| path_both_sides(phi, &process.paths[i], &bundle.view(i), si, ti))
        .collect()
}

/// Per-path both sides for the process stopped at `tau`.
pub fn ito_both_sides_stopped<T: Scalar>(
    phi: &TestFunction<T>,
    process: &ItoProcess<T>,
    bundle: &PathBundle<T>,
    s: T,
    t: T,
    tau: &StoppingTime<T>,
) -> Result<Vec<BothSides<T>>> {
    let (si, ti) = indices(process, bundle, s, t)?;
    (0..bundle.len())
        .into_par_iter()
        .map(|i| {
            let v = bundle.view(i);
            path_both_sides_stopped(phi, &process.paths[i], &v, si, ti, tau.first_index(&v))
        })
        .collect()
}
