//! Explicit monotone finite differences for `du/dt = G(u_xx)` in one
//! dimension.
//!
//! The G-normal expectation `E[phi(x + sqrt(tau) xi)]` is the time-`tau`
//! solution started from `phi`. Cylinder expectations are computed by nested
//! recursion over the monitoring increments: the innermost stage solves in
//! the last increment for every grid value of the earlier ones.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::sublinear::cylinder::Cylinder;
use crate::sublinear::uncertainty::UncertaintySet;

/// Default domain half-width in units of `sigma_hi sqrt(T)`.
pub const DEFAULT_WIDTH_FACTOR: f64 = 6.0;

/// Minimum number of interior grid points.
pub const MIN_INTERIOR_POINTS: usize = 64;

/// Default bound on stencil updates for nested cylinder solves.
pub const DEFAULT_WORK_BUDGET: f64 = 4e9;

/// Uniform spatial grid `x_0 + i dx`, `|i| <= half_points`, with a time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D<T> {
    center: T,
    dx: T,
    half_points: usize,
    dt: T,
}

impl<T: Scalar> Grid1D<T> {
    pub fn new(center: T, half_width: T, dx: T, dt: T) -> Result<Self> {
        if !(dx > T::zero()) || !(dt > T::zero()) || !(half_width > T::zero()) {
            return invalid("grid spacing, time step and half-width must be positive");
        }
        let half_points = (half_width / dx)
            .ceil()
            .to_usize()
            .ok_or_else(|| Error::InvalidArgument("grid too large".into()))?;
        if 2 * half_points < MIN_INTERIOR_POINTS + 1 {
            return Err(Error::Configuration(format!(
                "grid has {} interior points, need at least {MIN_INTERIOR_POINTS}",
                (2 * half_points).saturating_sub(1)
            )));
        }
        Ok(Self {
            center,
            dx,
            half_points,
            dt,
        })
    }

    /// Grid centred at 0 covering `DEFAULT_WIDTH_FACTOR * sigma_hi * sqrt(horizon)`
    /// with the largest stable time step `dx^2 / (2 sigma_hi^2)`.
    pub fn standard(uncertainty: &UncertaintySet<T>, horizon: T, dx: T) -> Result<Self> {
        Self::with_width_factor(uncertainty, horizon, dx, T::lit(DEFAULT_WIDTH_FACTOR))
    }

    pub fn with_width_factor(
        uncertainty: &UncertaintySet<T>,
        horizon: T,
        dx: T,
        width_factor: T,
    ) -> Result<Self> {
        let (_, hi) = interval(uncertainty)?;
        let hi = if hi > T::zero() { hi } else { T::one() };
        let dt = T::lit(0.5) * dx * dx / (hi * hi);
        Self::new(T::zero(), width_factor * hi * horizon.sqrt(), dx, dt)
    }

    pub fn center(&self) -> T {
        self.center
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn half_points(&self) -> usize {
        self.half_points
    }

    pub fn len(&self) -> usize {
        2 * self.half_points + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x(&self, i: usize) -> T {
        self.center + (T::from_usize_lossy(i) - T::from_usize_lossy(self.half_points)) * self.dx
    }

    pub fn points(&self) -> Vec<T> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    fn recentred(&self, center: T) -> Self {
        Self { center, ..*self }
    }

    /// `sigma_hi^2 dt / dx^2`.
    pub fn cfl(&self, sigma_hi: T) -> T {
        sigma_hi * sigma_hi * self.dt / (self.dx * self.dx)
    }
}

type TermFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// Terminal data `phi(x_1, ..., x_k)` with optional polynomial-growth
/// Lipschitz metadata `|phi(x) - phi(y)| <= C (1 + |x|^m + |y|^m) |x - y|`.
#[derive(Clone)]
pub struct TerminalCondition<T> {
    arity: usize,
    func: TermFn<T>,
    growth: Option<(T, i32)>,
}

impl<T: fmt::Debug> fmt::Debug for TerminalCondition<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TerminalCondition")
            .field("arity", &self.arity)
            .field("growth", &self.growth)
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> TerminalCondition<T> {
    pub fn new(arity: usize, f: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        Self {
            arity,
            func: Arc::new(f),
            growth: None,
        }
    }

    /// Single-variable terminal data.
    pub fn scalar(f: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Self::new(1, move |x| f(x[0]))
    }

    /// One-dimensional cylinder payoff read in increment coordinates.
    pub fn from_cylinder(payoff: &Cylinder<T>) -> Result<Self> {
        if payoff.dim() != 1 {
            return invalid("PDE oracle handles one-dimensional payoffs only");
        }
        let p = payoff.clone();
        Ok(Self::new(payoff.times().len(), move |x| {
            p.eval_increments(x)
        }))
    }

    pub fn with_growth(mut self, c: T, m: i32) -> Self {
        self.growth = Some((c, m));
        self
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn growth(&self) -> Option<(T, i32)> {
        self.growth
    }

    pub fn eval(&self, x: &[T]) -> T {
        (self.func)(x)
    }

    /// Spot-checks the growth bound on `samples` random pairs in
    /// `[-radius, radius]^arity`.
    pub fn check_growth(&self, radius: T, samples: usize, seed: u64) -> Result<()> {
        let Some((c, m)) = self.growth else {
            return Ok(());
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = radius.to_f64_lossy();
        let mut x = vec![T::zero(); self.arity];
        let mut y = vec![T::zero(); self.arity];
        for _ in 0..samples {
            for v in x.iter_mut().chain(y.iter_mut()) {
                *v = T::lit(rng.random_range(-r..=r));
            }
            let nx = norm(&x);
            let ny = norm(&y);
            let d = x
                .iter()
                .zip(&y)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<T>()
                .sqrt();
            let lhs = (self.eval(&x) - self.eval(&y)).abs();
            let rhs = c * (T::one() + nx.powi(m) + ny.powi(m)) * d;
            if lhs > rhs * (T::one() + T::lit(1e-9)) + T::lit(1e-12) {
                return Err(Error::Validation(format!(
                    "growth bound violated: |phi(x) - phi(y)| = {lhs} > {rhs}"
                )));
            }
        }
        Ok(())
    }
}

fn norm<T: Scalar>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum::<T>().sqrt()
}

fn interval<T: Scalar>(u: &UncertaintySet<T>) -> Result<(T, T)> {
    u.interval_bounds()
        .ok_or_else(|| Error::InvalidArgument("the G-heat solver is one-dimensional".into()))
}

/// Samples of a function on a [`Grid1D`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T> {
    pub grid: Grid1D<T>,
    pub values: Vec<T>,
}

impl<T: Scalar> GridFunction<T> {
    pub fn at_center(&self) -> T {
        self.values[self.grid.half_points]
    }

    /// Linear interpolation; `None` outside the grid.
    pub fn eval(&self, x: T) -> Option<T> {
        let s = (x - self.grid.x(0)) / self.grid.dx;
        if s < T::zero() || s > T::from_usize_lossy(self.values.len() - 1) {
            return None;
        }
        let i = s.floor().to_usize()?.min(self.values.len() - 2);
        let w = s - T::from_usize_lossy(i);
        Some(self.values[i] * (T::one() - w) + self.values[i + 1] * w)
    }
}

/// Steps the explicit scheme backward over `tau`, in place.
fn evolve<T: Scalar>(values: &mut Vec<T>, tau: T, lo: T, hi: T, grid: &Grid1D<T>) -> Result<()> {
    let steps = (tau / grid.dt).ceil().to_usize().unwrap_or(1).max(1);
    let dt = tau / T::from_usize_lossy(steps);
    let half = T::lit(0.5);
    let r_hi = half * hi * hi * dt / (grid.dx * grid.dx);
    let r_lo = half * lo * lo * dt / (grid.dx * grid.dx);
    let n = values.len();
    let mut next = values.clone();
    for _ in 0..steps {
        for i in 1..n - 1 {
            let d2 = values[i + 1] - values[i] - values[i] + values[i - 1];
            next[i] = values[i] + r_hi * d2.pos_part() - r_lo * d2.neg_part();
        }
        next[0] = next[1] + next[1] - next[2];
        next[n - 1] = next[n - 2] + next[n - 2] - next[n - 3];
        std::mem::swap(values, &mut next);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence(
            "non-finite value in G-heat solution".into(),
        ));
    }
    Ok(())
}

fn check_cfl<T: Scalar>(grid: &Grid1D<T>, hi: T) -> Result<()> {
    let c = grid.cfl(hi);
    if c > T::lit(0.5) * (T::one() + T::lit(1e-12)) {
        return Err(Error::Configuration(format!(
            "CFL condition violated: sigma_hi^2 dt / dx^2 = {c} > 1/2"
        )));
    }
    Ok(())
}

/// `u(0, x) = E[phi(x + sqrt(tau) xi)]` on the grid points.
pub fn solve_g_heat<T: Scalar>(
    phi: &TerminalCondition<T>,
    tau: T,
    uncertainty: &UncertaintySet<T>,
    grid: &Grid1D<T>,
) -> Result<GridFunction<T>> {
    let (lo, hi) = interval(uncertainty)?;
    if phi.arity != 1 {
        return invalid("solve_g_heat takes single-variable terminal data");
    }
    if !(tau > T::zero()) {
        return invalid("duration must be positive");
    }
    check_cfl(grid, hi)?;
    let mut values: Vec<T> = (0..grid.len()).map(|i| phi.eval(&[grid.x(i)])).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence(
            "terminal data not finite on the grid".into(),
        ));
    }
    evolve(&mut values, tau, lo, hi, grid)?;
    Ok(GridFunction {
        grid: *grid,
        values,
    })
}

struct Nested<'a, T> {
    phi: &'a TerminalCondition<T>,
    durations: Vec<T>,
    lo: T,
    hi: T,
    grid: Grid1D<T>,
}

impl<T: Scalar> Nested<'_, T> {
    /// Value of stage `prefix.len()` at the given increments.
    fn value(&self, prefix: &mut Vec<T>) -> Result<T> {
        let k = prefix.len();
        if k == self.durations.len() {
            return Ok(self.phi.eval(prefix));
        }
        let grid = self.grid.recentred(T::zero());
        let mut values: Vec<T> = if k + 1 == self.durations.len() {
            (0..grid.len())
                .map(|i| {
                    prefix.push(grid.x(i));
                    let v = self.phi.eval(prefix);
                    prefix.pop();
                    v
                })
                .collect()
        } else {
            let base = prefix.clone();
            (0..grid.len())
                .into_par_iter()
                .map(|i| {
                    let mut local = base.clone();
                    local.push(grid.x(i));
                    self.value(&mut local)
                })
                .collect::<Result<Vec<T>>>()?
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(
                "terminal data not finite on the grid".into(),
            ));
        }
        evolve(&mut values, self.durations[k], self.lo, self.hi, &grid)?;
        Ok(values[grid.half_points])
    }

    fn work(&self, from: usize) -> f64 {
        let pts = self.grid.len() as f64;
        let mut width = 1.0;
        let mut total = 0.0;
        for &d in &self.durations[from..] {
            let steps = (d / self.grid.dt).ceil().to_f64_lossy().max(1.0);
            total += width * pts * steps;
            width *= pts;
        }
        total
    }
}

fn nested<'a, T: Scalar>(
    phi: &'a TerminalCondition<T>,
    times: &[T],
    uncertainty: &UncertaintySet<T>,
    grid: &Grid1D<T>,
) -> Result<Nested<'a, T>> {
    let (lo, hi) = interval(uncertainty)?;
    if times.is_empty() {
        return invalid("at least one monitoring time is required");
    }
    if times.len() > 3 {
        return Err(Error::Size {
            what: "PDE monitoring times",
            required: times.len(),
            bound: 3,
        });
    }
    if phi.arity != times.len() {
        return invalid("terminal arity must equal the number of monitoring times");
    }
    if !(times[0] > T::zero()) || times.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("monitoring times must be positive and strictly increasing");
    }
    check_cfl(grid, hi)?;
    let mut durations = Vec::with_capacity(times.len());
    let mut prev = T::zero();
    for &t in times {
        durations.push(t - prev);
        prev = t;
    }
    Ok(Nested {
        phi,
        durations,
        lo,
        hi,
        grid: *grid,
    })
}

fn check_work<T: Scalar>(n: &Nested<'_, T>, from: usize) -> Result<()> {
    let w = n.work(from);
    if w > DEFAULT_WORK_BUDGET {
        return Err(Error::Size {
            what: "PDE stencil updates",
            required: w.min(usize::MAX as f64) as usize,
            bound: DEFAULT_WORK_BUDGET as usize,
        });
    }
    Ok(())
}

/// `E[phi(B_{t_1} - B_{t_0}, ..., B_{t_n} - B_{t_{n-1}})]` for `n <= 3`.
pub fn g_expectation_cylinder<T: Scalar>(
    phi: &TerminalCondition<T>,
    times: &[T],
    uncertainty: &UncertaintySet<T>,
    grid: &Grid1D<T>,
) -> Result<T> {
    let n = nested(phi, times, uncertainty, grid)?;
    check_work(&n, 0)?;
    n.value(&mut Vec::with_capacity(times.len()))
}

/// Conditional value given the first `j` observed increments.
pub fn conditional_psi<T: Scalar>(
    phi: &TerminalCondition<T>,
    times: &[T],
    j: usize,
    observed: &[T],
    uncertainty: &UncertaintySet<T>,
    grid: &Grid1D<T>,
) -> Result<T> {
    let n = nested(phi, times, uncertainty, grid)?;
    if j == 0 || j >= times.len() {
        return invalid(format!(
            "conditioning index j = {j} must satisfy 1 <= j < {}",
            times.len()
        ));
    }
    if observed.len() != j {
        return invalid(format!(
            "expected {j} observed increments, got {}",
            observed.len()
        ));
    }
    check_work(&n, j)?;
    n.value(&mut observed.to_vec())
}

/// Gaussian expectation `E[phi(x + s Z)]` by composite Simpson quadrature
/// on `[-width, width]` standard deviations.
pub fn gaussian_expectation<T: Scalar>(
    phi: impl Fn(T) -> T,
    x: T,
    s: T,
    width: T,
    intervals: usize,
) -> T {
    let n = intervals + intervals % 2;
    let h = (width + width) / T::from_usize_lossy(n);
    let norm = T::one() / (T::lit(2.0) * T::lit(std::f64::consts::PI)).sqrt();
    let mut acc = T::zero();
    for i in 0..=n {
        let z = -width + h * T::from_usize_lossy(i);
        let w = if i == 0 || i == n {
            T::one()
        } else if i % 2 == 1 {
            T::lit(4.0)
        } else {
            T::lit(2.0)
        };
        acc += w * phi(x + s * z) * (-(z * z) * T::lit(0.5)).exp();
    }
    acc * h / T::lit(3.0) * norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u() -> UncertaintySet<f64> {
        UncertaintySet::interval(0.5, 1.0).unwrap()
    }

    fn grid(dx: f64) -> Grid1D<f64> {
        Grid1D::standard(&u(), 1.0, dx).unwrap()
    }

    #[test]
    fn square_and_negative_square() {
        let g = grid(1.0 / 16.0);
        let sq = solve_g_heat(&TerminalCondition::scalar(|x: f64| x * x), 1.0, &u(), &g).unwrap();
        assert!((sq.at_center() - 1.0).abs() < 1e-3);
        let neg = solve_g_heat(&TerminalCondition::scalar(|x: f64| -x * x), 1.0, &u(), &g).unwrap();
        assert!((neg.at_center() + 0.25).abs() < 1e-3);
    }

    #[test]
    fn affine_preserved_exactly() {
        let g = grid(1.0 / 32.0);
        let s = solve_g_heat(&TerminalCondition::scalar(|x: f64| x), 1.0, &u(), &g).unwrap();
        for (i, v) in s.values.iter().enumerate() {
            assert_eq!(*v, g.x(i));
        }
    }

    #[test]
    fn cfl_violation_is_configuration_error() {
        let g = Grid1D::new(0.0, 6.0, 0.05, 0.01).unwrap();
        let err = solve_g_heat(&TerminalCondition::scalar(|x: f64| x), 1.0, &u(), &g).unwrap_err();
        assert!(matches!(err, Error::Configuration(_)));
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(
            Grid1D::new(0.0, 1.0, 0.5, 0.01),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn divergence_detected() {
        let g = grid(1.0 / 8.0);
        let phi = TerminalCondition::scalar(|x: f64| if x > 1.0 { f64::NAN } else { x });
        assert!(matches!(
            solve_g_heat(&phi, 1.0, &u(), &g),
            Err(Error::Divergence(_))
        ));
    }

    #[test]
    fn convex_reduces_to_upper_heat_kernel() {
        let g = grid(1.0 / 32.0);
        let s = solve_g_heat(&TerminalCondition::scalar(|x: f64| x.abs()), 1.0, &u(), &g).unwrap();
        let exact = (2.0 / std::f64::consts::PI).sqrt();
        assert!((s.at_center() - exact).abs() < 2e-3);
        for x in [-0.7, 0.3, 1.1] {
            let q = gaussian_expectation(|y: f64| y.abs(), x, 1.0, 10.0, 4000);
            assert!((s.eval(x).unwrap() - q).abs() < 2e-3);
        }
    }

    #[test]
    fn concave_reduces_to_lower_heat_kernel() {
        let g = grid(1.0 / 32.0);
        let phi = TerminalCondition::scalar(|x: f64| -x.abs());
        let s = solve_g_heat(&phi, 1.0, &u(), &g).unwrap();
        let q = gaussian_expectation(|y: f64| -y.abs(), 0.0, 0.5, 10.0, 4000);
        assert!((s.at_center() - q).abs() < 2e-3);
    }

    #[test]
    fn cylinder_examples() {
        let g = grid(1.0 / 16.0);
        let sum = TerminalCondition::new(2, |x: &[f64]| x[0] + x[1]);
        let v = g_expectation_cylinder(&sum, &[0.5, 1.0], &u(), &g).unwrap();
        assert!(v.abs() < 1e-3);
        let sq = TerminalCondition::new(2, |x: &[f64]| x[0] * x[0] + x[1] * x[1]);
        let v = g_expectation_cylinder(&sq, &[0.5, 1.0], &u(), &g).unwrap();
        assert!((v - 1.0).abs() < 2e-3);
        let c = TerminalCondition::new(2, |_: &[f64]| 3.25);
        assert_eq!(
            g_expectation_cylinder(&c, &[0.5, 1.0], &u(), &g).unwrap(),
            3.25
        );
        let four = TerminalCondition::new(4, |_: &[f64]| 0.0);
        assert!(matches!(
            g_expectation_cylinder(&four, &[0.25, 0.5, 0.75, 1.0], &u(), &g),
            Err(Error::Size { .. })
        ));
    }

    #[test]
    fn psi_examples() {
        let g = grid(1.0 / 16.0);
        let next = TerminalCondition::new(2, |x: &[f64]| x[1]);
        let v = conditional_psi(&next, &[0.5, 1.0], 1, &[0.3], &u(), &g).unwrap();
        assert!(v.abs() < 1e-3);
        let first = TerminalCondition::new(2, |x: &[f64]| x[0]);
        assert_eq!(
            conditional_psi(&first, &[0.5, 1.0], 1, &[0.7], &u(), &g).unwrap(),
            0.7
        );
        let sq = TerminalCondition::new(2, |x: &[f64]| x[1] * x[1]);
        let v = conditional_psi(&sq, &[0.5, 1.0], 1, &[-0.4], &u(), &g).unwrap();
        assert!((v - 0.5).abs() < 1e-3);
        assert!(conditional_psi(&sq, &[0.5, 1.0], 2, &[0.0, 0.0], &u(), &g).is_err());
        assert!(conditional_psi(&sq, &[0.5, 1.0], 0, &[], &u(), &g).is_err());
    }

    #[test]
    fn growth_spot_check() {
        let sq = TerminalCondition::scalar(|x: f64| x * x).with_growth(1.0, 1);
        sq.check_growth(6.0, 1000, 1).unwrap();
        let bad = TerminalCondition::scalar(|x: f64| x.powi(4)).with_growth(1.0, 1);
        assert!(matches!(
            bad.check_growth(6.0, 1000, 1),
            Err(Error::Validation(_))
        ));
    }
}
