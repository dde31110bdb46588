//! Itô processes
//! `dX^nu = alpha^nu dt + eta^{nu ij} d<B^i, B^j> + beta^{nu j} dB^j`
//! built by left-endpoint sums on the path grid.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::ito::process::{Bound, SimpleProcess};
use crate::ito::stopping::StoppingTime;
use crate::scalar::Scalar;
use crate::sublinear::partition::Partition;
use crate::sublinear::path::PathView;
use crate::sublinear::simulate::PathBundle;

use super::test_function::MAX_STATE_DIM;

type StateFn<T> = Arc<dyn Fn(T, &[T]) -> T + Send + Sync>;

/// One coefficient of a triple.
#[derive(Clone)]
pub enum Coefficient<T> {
    Constant(T),
    /// Simple process on a subgrid of the path grid.
    Process(SimpleProcess<T>),
    /// Function of `(t_j, X_{t_j})` frozen on each path step.
    State(StateFn<T>),
}

impl<T: fmt::Debug> fmt::Debug for Coefficient<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Self::Process(p) => f.debug_tuple("Process").field(p).finish(),
            Self::State(_) => f.write_str("State(..)"),
        }
    }
}

impl<T: Scalar> Coefficient<T> {
    pub fn state(f: impl Fn(T, &[T]) -> T + Send + Sync + 'static) -> Self {
        Self::State(Arc::new(f))
    }

    fn is_zero(&self) -> bool {
        matches!(self, Self::Constant(c) if c.is_zero())
    }
}

/// `(alpha^nu, eta^{nu ij}, beta^{nu j})` for `nu < n` and `i, j < d`, with an
/// optional stopping time that zeroes every coefficient from the stopping
/// index on.
#[derive(Debug, Clone)]
pub struct CoefficientTriple<T> {
    n: usize,
    d: usize,
    alpha: Vec<Coefficient<T>>,
    eta: Vec<Coefficient<T>>,
    beta: Vec<Coefficient<T>>,
    stop: Option<StoppingTime<T>>,
}

impl<T: Scalar> CoefficientTriple<T> {
    /// All coefficients zero.
    pub fn zero(n: usize, d: usize) -> Result<Self> {
        if n == 0 || n > MAX_STATE_DIM || d == 0 || d > 2 {
            return invalid(format!("unsupported dimensions n = {n}, d = {d}"));
        }
        Ok(Self {
            n,
            d,
            alpha: vec![Coefficient::Constant(T::zero()); n],
            eta: vec![Coefficient::Constant(T::zero()); n * d * d],
            beta: vec![Coefficient::Constant(T::zero()); n * d],
            stop: None,
        })
    }

    /// Constant coefficients; `eta` is indexed `(nu * d + i) * d + j` and
    /// `beta` is indexed `nu * d + j`.
    pub fn constant(n: usize, d: usize, alpha: &[T], eta: &[T], beta: &[T]) -> Result<Self> {
        let mut c = Self::zero(n, d)?;
        if alpha.len() != n || eta.len() != n * d * d || beta.len() != n * d {
            return invalid("coefficient arrays do not match the dimensions");
        }
        c.alpha = alpha.iter().map(|&a| Coefficient::Constant(a)).collect();
        c.eta = eta.iter().map(|&a| Coefficient::Constant(a)).collect();
        c.beta = beta.iter().map(|&a| Coefficient::Constant(a)).collect();
        Ok(c)
    }

    /// # Panics
    /// If `nu >= n`.
    pub fn with_alpha(mut self, nu: usize, c: Coefficient<T>) -> Self {
        assert!(nu < self.n, "alpha index out of range");
        self.alpha[nu] = c;
        self
    }

    /// # Panics
    /// If an index is out of range.
    pub fn with_eta(mut self, nu: usize, i: usize, j: usize, c: Coefficient<T>) -> Self {
        assert!(
            nu < self.n && i < self.d && j < self.d,
            "eta index out of range"
        );
        self.eta[(nu * self.d + i) * self.d + j] = c;
        self
    }

    /// # Panics
    /// If an index is out of range.
    pub fn with_beta(mut self, nu: usize, j: usize, c: Coefficient<T>) -> Self {
        assert!(nu < self.n && j < self.d, "beta index out of range");
        self.beta[nu * self.d + j] = c;
        self
    }

    /// `1_{[0, tau]}` times every coefficient.
    pub fn truncated(&self, tau: &StoppingTime<T>) -> Self {
        let mut c = self.clone();
        c.stop = Some(tau.clone());
        c
    }

    /// The same coefficients without truncation.
    pub fn untruncated(&self) -> Self {
        let mut c = self.clone();
        c.stop = None;
        c
    }

    pub fn stop(&self) -> Option<&StoppingTime<T>> {
        self.stop.as_ref()
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn noise_dim(&self) -> usize {
        self.d
    }

    fn all(&self) -> impl Iterator<Item = &Coefficient<T>> {
        self.alpha.iter().chain(&self.eta).chain(&self.beta)
    }

    /// Checks that every process coefficient lives on a subgrid of `grid`.
    pub fn check_grid(&self, grid: &Partition<T>) -> Result<()> {
        for c in self.all() {
            if let Coefficient::Process(p) = c {
                p.partition().embed_in(grid)?;
            }
        }
        Ok(())
    }

    fn check_dims(&self, x0: &[T], d: usize) -> Result<()> {
        if x0.len() != self.n {
            return invalid(format!(
                "initial value has {} components, coefficients have {}",
                x0.len(),
                self.n
            ));
        }
        if d != self.d {
            return invalid(format!(
                "paths have dimension {d}, coefficients expect {}",
                self.d
            ));
        }
        Ok(())
    }
}

/// Coefficients bound to one path for step-by-step evaluation.
pub(crate) struct Stepper<'a, T> {
    coeffs: &'a CoefficientTriple<T>,
    bounds: Vec<Option<Bound<'a, T>>>,
    stop: Option<usize>,
    path: PathView<'a, T>,
}

impl<'a, T: Scalar> Stepper<'a, T> {
    pub(crate) fn new(coeffs: &'a CoefficientTriple<T>, path: &PathView<'a, T>) -> Result<Self> {
        let bounds = coeffs
            .all()
            .map(|c| match c {
                Coefficient::Process(p) => p.bind(path).map(Some),
                _ => Ok(None),
            })
            .collect::<Result<Vec<_>>>()?;
        let stop = coeffs.stop.as_ref().and_then(|tau| tau.first_index(path));
        Ok(Self {
            coeffs,
            bounds,
            stop,
            path: *path,
        })
    }

    pub(crate) fn stop(&self) -> Option<usize> {
        self.stop
    }

    fn eval(&self, slot: usize, c: &Coefficient<T>, j: usize, x: &[T]) -> T {
        match c {
            Coefficient::Constant(v) => *v,
            Coefficient::Process(_) => self.bounds[slot].as_ref().expect("bound").value(j),
            Coefficient::State(f) => f(self.path.time(j), x),
        }
    }

    /// Coefficients on path step `j` given `X_{t_j} = x`, written into the
    /// three output slices.
    pub(crate) fn coefficients(
        &self,
        j: usize,
        x: &[T],
        alpha: &mut [T],
        eta: &mut [T],
        beta: &mut [T],
    ) {
        let active = self.stop.is_none_or(|s| j < s);
        let c = self.coeffs;
        let (na, ne) = (c.alpha.len(), c.eta.len());
        let fill = |out: &mut [T], list: &[Coefficient<T>], offset: usize| {
            for (k, (o, coef)) in out.iter_mut().zip(list).enumerate() {
                *o = if active && !coef.is_zero() {
                    self.eval(offset + k, coef, j, x)
                } else {
                    T::zero()
                };
            }
        };
        fill(alpha, &c.alpha, 0);
        fill(eta, &c.eta, na);
        fill(beta, &c.beta, na + ne);
    }
}

/// Increment of `X^nu` over path step `j`.
pub(crate) fn increment<T: Scalar>(
    path: &PathView<'_, T>,
    j: usize,
    n: usize,
    d: usize,
    alpha: &[T],
    eta: &[T],
    beta: &[T],
    out: &mut [T],
) {
    let dt = path.time(j + 1) - path.time(j);
    for nu in 0..n {
        let mut inc = alpha[nu] * dt;
        for i in 0..d {
            for k in 0..d {
                let e = eta[(nu * d + i) * d + k];
                if !e.is_zero() {
                    inc += e * path.dqv(j, i, k);
                }
            }
        }
        for k in 0..d {
            let b = beta[nu * d + k];
            if !b.is_zero() {
                inc += b * path.db(j, k);
            }
        }
        out[nu] = inc;
    }
}

/// One path of an Itô process with the coefficients used on every step.
#[derive(Debug, Clone, PartialEq)]
pub struct ItoPath<T> {
    n: usize,
    d: usize,
    x: Vec<T>,
    alpha: Vec<T>,
    eta: Vec<T>,
    beta: Vec<T>,
    stop: Option<usize>,
}

impl<T: Scalar> ItoPath<T> {
    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn noise_dim(&self) -> usize {
        self.d
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.x.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// `X_{t_j}`.
    pub fn x(&self, j: usize) -> &[T] {
        &self.x[j * self.n..(j + 1) * self.n]
    }

    pub fn alpha(&self, j: usize) -> &[T] {
        &self.alpha[j * self.n..(j + 1) * self.n]
    }

    pub fn eta(&self, j: usize) -> &[T] {
        let w = self.n * self.d * self.d;
        &self.eta[j * w..(j + 1) * w]
    }

    pub fn beta(&self, j: usize) -> &[T] {
        let w = self.n * self.d;
        &self.beta[j * w..(j + 1) * w]
    }

    /// Index from which the coefficients are truncated, if any.
    pub fn stop(&self) -> Option<usize> {
        self.stop
    }
}

/// Builds `X` along one path without checking for finiteness.
pub(crate) fn fill_path<T: Scalar>(
    x0: &[T],
    coeffs: &CoefficientTriple<T>,
    path: &PathView<'_, T>,
) -> Result<ItoPath<T>> {
    coeffs.check_dims(x0, path.dim())?;
    let (n, d) = (coeffs.n, coeffs.d);
    let steps = path.len() - 1;
    let stepper = Stepper::new(coeffs, path)?;
    let mut x = Vec::with_capacity(path.len() * n);
    x.extend_from_slice(x0);
    let mut alpha = vec![T::zero(); steps * n];
    let mut eta = vec![T::zero(); steps * n * d * d];
    let mut beta = vec![T::zero(); steps * n * d];
    let mut inc = [T::zero(); MAX_STATE_DIM];
    for j in 0..steps {
        let (a, e, b) = (
            &mut alpha[j * n..(j + 1) * n],
            &mut eta[j * n * d * d..(j + 1) * n * d * d],
            &mut beta[j * n * d..(j + 1) * n * d],
        );
        stepper.coefficients(j, &x[j * n..(j + 1) * n], a, e, b);
        increment(path, j, n, d, a, e, b, &mut inc);
        for nu in 0..n {
            let next = x[j * n + nu] + inc[nu];
            x.push(next);
        }
    }
    Ok(ItoPath {
        n,
        d,
        x,
        alpha,
        eta,
        beta,
        stop: stepper.stop(),
    })
}

/// `X` along one path:
/// `X_{j+1} = X_j + alpha_j dt + eta_j d<B> + beta_j dB` with the
/// coefficients frozen at the left endpoint of each path step.
pub fn build_path<T: Scalar>(
    x0: &[T],
    coeffs: &CoefficientTriple<T>,
    path: &PathView<'_, T>,
) -> Result<ItoPath<T>> {
    let p = fill_path(x0, coeffs, path)?;
    if let Some(j) = (0..p.len()).find(|&j| p.x(j).iter().any(|v| !v.is_finite())) {
        return Err(Error::Divergence(format!(
            "Itô process is not finite at grid index {j}"
        )));
    }
    Ok(p)
}

/// An Itô process on every path of a bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct ItoProcess<T> {
    pub partition: Partition<T>,
    pub x0: Vec<T>,
    pub paths: Vec<ItoPath<T>>,
}

/// Builds `X` on every path of `bundle` (in parallel, in path order).
pub fn build_process<T: Scalar>(
    x0: &[T],
    coeffs: &CoefficientTriple<T>,
    bundle: &PathBundle<T>,
) -> Result<ItoProcess<T>> {
    coeffs.check_grid(&bundle.partition)?;
    coeffs.check_dims(x0, bundle.dim())?;
    let paths = (0..bundle.len())
        .into_par_iter()
        .map(|i| build_path(x0, coeffs, &bundle.view(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ItoProcess {
        partition: bundle.partition.clone(),
        x0: x0.to_vec(),
        paths,
    })
}

/// Sample means of `int |alpha|^4 dt`, `int |eta|^4 dt` and `int |beta|^8 dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrability<T> {
    pub alpha_m4: T,
    pub eta_m4: T,
    pub beta_m8: T,
}

impl<T: Scalar> Integrability<T> {
    pub fn is_finite(&self) -> bool {
        self.alpha_m4.is_finite() && self.eta_m4.is_finite() && self.beta_m8.is_finite()
    }
}

pub(crate) fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |s, &a| s + a * a).sqrt()
}

impl<T: Scalar> ItoProcess<T> {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Integrability of the coefficients used along the paths.
    pub fn integrability(&self) -> Integrability<T> {
        let m = T::from_usize_lossy(self.paths.len().max(1));
        let mut acc = [T::zero(); 3];
        for p in &self.paths {
            for j in 0..p.len() - 1 {
                let dt = self.partition.dt(j);
                acc[0] += norm(p.alpha(j)).powi(4) * dt;
                acc[1] += norm(p.eta(j)).powi(4) * dt;
                acc[2] += norm(p.beta(j)).powi(8) * dt;
            }
        }
        Integrability {
            alpha_m4: acc[0] / m,
            eta_m4: acc[1] / m,
            beta_m8: acc[2] / m,
        }
    }
}

/// `X_{t_j}` for `j >= s` with coefficients frozen on `[t_s, t_j]`:
/// `X_s + alpha (t_j - t_s) + eta (<B>_j - <B>_s) + beta (B_j - B_s)`.
pub fn frozen_coefficient_values<T: Scalar>(
    x_s: &[T],
    s: usize,
    alpha: &[T],
    eta: &[T],
    beta: &[T],
    path: &PathView<'_, T>,
) -> Result<Vec<Vec<T>>> {
    let n = x_s.len();
    let d = path.dim();
    if alpha.len() != n || eta.len() != n * d * d || beta.len() != n * d || s >= path.len() {
        return invalid("frozen coefficients do not match the dimensions");
    }
    Ok((s..path.len())
        .map(|j| {
            (0..n)
                .map(|nu| {
                    let mut v = x_s[nu] + alpha[nu] * (path.time(j) - path.time(s));
                    for i in 0..d {
                        for k in 0..d {
                            v += eta[(nu * d + i) * d + k] * (path.qv(j, i, k) - path.qv(s, i, k));
                        }
                    }
                    for k in 0..d {
                        v += beta[nu * d + k] * (path.b(j, k) - path.b(s, k));
                    }
                    v
                })
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sublinear::simulate::{simulate_paths, PolicyRule, SimGrid};
    use crate::sublinear::uncertainty::UncertaintySet;

    fn u() -> UncertaintySet<f64> {
        UncertaintySet::interval(0.5, 1.0).unwrap()
    }

    fn bundle(rule: &str, steps: usize, m: usize) -> PathBundle<f64> {
        let rule = PolicyRule::named(rule, &u(), 3).unwrap();
        simulate_paths(
            &u(),
            &rule,
            &SimGrid::new(&Partition::uniform(1.0, steps).unwrap()),
            m,
            11,
        )
        .unwrap()
    }

    #[test]
    fn trivial_processes() {
        let b = bundle("random_switching", 32, 20);
        let bm = CoefficientTriple::constant(1, 1, &[0.0], &[0.0], &[1.0]).unwrap();
        let x = build_process(&[0.7], &bm, &b).unwrap();
        for (p, path) in x.paths.iter().zip(&b.paths) {
            let v = path.view();
            for j in 0..v.len() {
                assert!((p.x(j)[0] - 0.7 - v.b1(j)).abs() < 1e-12);
            }
        }
        let drift = CoefficientTriple::constant(1, 1, &[1.0], &[0.0], &[0.0]).unwrap();
        let x = build_process(&[0.7], &drift, &b).unwrap();
        for j in 0..=32 {
            assert!((x.paths[3].x(j)[0] - 0.7 - j as f64 / 32.0).abs() < 1e-14);
        }
        let hi = bundle("sigma_hi", 32, 5);
        let comp = CoefficientTriple::constant(1, 1, &[0.0], &[1.0], &[0.0]).unwrap();
        let x = build_process(&[0.7], &comp, &hi).unwrap();
        for j in 0..=32 {
            assert!((x.paths[0].x(j)[0] - 0.7 - j as f64 / 32.0).abs() < 1e-14);
        }
    }

    #[test]
    fn increment_identity_is_exact() {
        let b = bundle("random_switching", 16, 10);
        let c = CoefficientTriple::zero(1, 1)
            .unwrap()
            .with_alpha(0, Coefficient::state(|_, x: &[f64]| -x[0]))
            .with_eta(0, 0, 0, Coefficient::state(|t, x: &[f64]| (x[0] + t).sin()))
            .with_beta(
                0,
                0,
                Coefficient::Process(SimpleProcess::brownian(
                    &Partition::uniform(1.0, 4).unwrap(),
                    0,
                )),
            );
        let x = build_process(&[0.2], &c, &b).unwrap();
        for (p, path) in x.paths.iter().zip(&b.paths) {
            let v = path.view();
            for j in 0..16 {
                let dt = v.time(j + 1) - v.time(j);
                let inc =
                    p.alpha(j)[0] * dt + p.eta(j)[0] * v.dqv(j, 0, 0) + p.beta(j)[0] * v.db(j, 0);
                assert_eq!(p.x(j + 1)[0], p.x(j)[0] + inc);
                assert_eq!(p.alpha(j)[0], -p.x(j)[0]);
            }
        }
        assert!(x.integrability().is_finite());
    }

    #[test]
    fn grid_mismatch_and_dimension_errors() {
        let b = bundle("sigma_lo", 8, 2);
        let off = Partition::from_times(vec![0.0, 0.3, 1.0]).unwrap();
        let c = CoefficientTriple::zero(1, 1).unwrap().with_beta(
            0,
            0,
            Coefficient::Process(SimpleProcess::constant(&off, 1.0)),
        );
        assert!(build_process(&[0.0], &c, &b).is_err());
        let ok = CoefficientTriple::<f64>::zero(1, 1).unwrap();
        assert!(build_process(&[0.0, 1.0], &ok, &b).is_err());
        assert!(CoefficientTriple::<f64>::zero(3, 1).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let b = bundle("sigma_hi", 64, 1);
        let c = CoefficientTriple::zero(1, 1)
            .unwrap()
            .with_alpha(0, Coefficient::state(|_, x: &[f64]| x[0] * x[0] * 1e80));
        assert!(matches!(
            build_process(&[1.0], &c, &b),
            Err(Error::Divergence(_))
        ));
    }
}
