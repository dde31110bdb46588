//! Mean-square residual of the Itô formula under mesh refinement, sampled
//! through a panel of adversarial volatility controls.

use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::scalar::{Mat2, Scalar};
use crate::sublinear::partition::Partition;
use crate::sublinear::path::PathView;
use crate::sublinear::simulate::{map_paths, mean_and_se, ControlRule, PolicyRule, SimGrid};
use crate::sublinear::uncertainty::{Control, UncertaintySet};

use super::both_sides::{path_both_sides, qv_integrand};
use super::process::{build_path, increment, CoefficientTriple, Stepper};
use super::test_function::{TestFunction, MAX_STATE_DIM};
use super::ItoCase;

/// Controls the residual is sampled under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PanelControl {
    /// `sigma = sigma_lo` (smallest-trace covariance when `d = 2`).
    Low,
    /// `sigma = sigma_hi` (largest-trace covariance when `d = 2`).
    High,
    /// `sigma_hi` where the curvature of `phi` along `X` is nonnegative,
    /// `sigma_lo` elsewhere.
    Curvature,
    /// Seeded uniform switching between the extreme controls.
    RandomSwitching,
}

impl PanelControl {
    pub const ALL: [Self; 4] = [
        Self::Low,
        Self::High,
        Self::Curvature,
        Self::RandomSwitching,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Low => "sigma_lo",
            Self::High => "sigma_hi",
            Self::Curvature => "curvature_feedback",
            Self::RandomSwitching => "random_switching",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

fn trace<T: Scalar>(q: &Mat2<T>) -> T {
    q[0][0] + q[1][1]
}

fn extreme_control<T: Scalar>(u: &UncertaintySet<T>, high: bool) -> Control<T> {
    match (u.interval_bounds(), u.theta()) {
        (Some((lo, hi)), _) => Control::Sigma(if high { hi } else { lo }),
        (None, Some(theta)) => {
            let mut best = 0;
            for (i, q) in theta.iter().enumerate() {
                let better = if high {
                    trace(q) > trace(&theta[best])
                } else {
                    trace(q) < trace(&theta[best])
                };
                if better {
                    best = i;
                }
            }
            Control::Theta(best)
        }
        (None, None) => unreachable!("uncertainty set is an interval or a covariance set"),
    }
}

/// Feedback control that tracks `X` along the path and maximizes the
/// second-order term of the formula: `sigma_hi` when `d^2 phi >= 0`
/// (`n = d = 1`), the sign of `d^2_{mu nu} phi beta^mu beta^nu` (`n = 2, d = 1`),
/// or the covariance maximizing `tr(Q C)` with
/// `C_{ik} = d^2_{mu nu} phi beta^{mu i} beta^{nu k}` (`d = 2`, ties to the
/// lower index).
#[derive(Debug, Clone)]
pub struct CurvatureFeedback<T> {
    phi: TestFunction<T>,
    coeffs: CoefficientTriple<T>,
    x0: Vec<T>,
    lo: Control<T>,
    hi: Control<T>,
    theta: Vec<Mat2<T>>,
}

/// `X` tracked up to the current step.
#[derive(Debug, Clone)]
pub struct FeedbackState<T> {
    x: Vec<T>,
    done: usize,
}

impl<T: Scalar> CurvatureFeedback<T> {
    pub fn new(
        phi: &TestFunction<T>,
        coeffs: &CoefficientTriple<T>,
        x0: &[T],
        u: &UncertaintySet<T>,
    ) -> Result<Self> {
        if coeffs.noise_dim() != u.dim() || coeffs.state_dim() != x0.len() || phi.dim() != x0.len()
        {
            return invalid("feedback control dimensions do not match");
        }
        Ok(Self {
            phi: phi.clone(),
            coeffs: coeffs.clone(),
            x0: x0.to_vec(),
            lo: extreme_control(u, false),
            hi: extreme_control(u, true),
            theta: u.theta().map(<[_]>::to_vec).unwrap_or_default(),
        })
    }

    fn decide(&self, t: T, x: &[T], eta: &[T], beta: &[T]) -> Control<T> {
        let (n, d) = (self.coeffs.state_dim(), self.coeffs.noise_dim());
        if d == 1 {
            let c = if n == 1 {
                self.phi.hessian(t, x, 0, 0)
            } else {
                let zero = vec![T::zero(); eta.len()];
                T::lit(2.0) * qv_integrand(&self.phi, t, x, &zero, beta, 1, 0, 0)
            };
            return if c >= T::zero() { self.hi } else { self.lo };
        }
        let zero = vec![T::zero(); eta.len()];
        let mut cm = [[T::zero(); 2]; 2];
        for (i, row) in cm.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = qv_integrand(&self.phi, t, x, &zero, beta, 2, i, k);
            }
        }
        let score = |q: &Mat2<T>| {
            (0..2).fold(T::zero(), |s, i| {
                s + (0..2).fold(T::zero(), |s, k| s + q[i][k] * cm[k][i])
            })
        };
        let mut best = 0;
        for (i, q) in self.theta.iter().enumerate() {
            if score(q) > score(&self.theta[best]) {
                best = i;
            }
        }
        Control::Theta(best)
    }
}

impl<T: Scalar> ControlRule<T> for CurvatureFeedback<T> {
    type State = FeedbackState<T>;

    fn start(&self, _path_index: u64) -> Self::State {
        FeedbackState {
            x: self.x0.clone(),
            done: 0,
        }
    }

    fn choose(&self, state: &mut Self::State, prefix: &PathView<'_, T>) -> Control<T> {
        let (n, d) = (self.coeffs.state_dim(), self.coeffs.noise_dim());
        let Ok(stepper) = Stepper::new(&self.coeffs, prefix) else {
            return self.hi;
        };
        let mut alpha = [T::zero(); MAX_STATE_DIM];
        let mut eta = [T::zero(); MAX_STATE_DIM * 4];
        let mut beta = [T::zero(); MAX_STATE_DIM * 2];
        let (a, e, b) = (&mut alpha[..n], &mut eta[..n * d * d], &mut beta[..n * d]);
        let mut inc = [T::zero(); MAX_STATE_DIM];
        for j in state.done..prefix.last() {
            stepper.coefficients(j, &state.x, a, e, b);
            increment(prefix, j, n, d, a, e, b, &mut inc);
            for nu in 0..n {
                state.x[nu] += inc[nu];
            }
        }
        state.done = prefix.last();
        stepper.coefficients(prefix.last(), &state.x, a, e, b);
        self.decide(prefix.now(), &state.x, e, b)
    }
}

/// A panel control ready for simulation.
#[derive(Debug, Clone)]
pub enum PanelRule<T> {
    Policy(PolicyRule<T>),
    Curvature(CurvatureFeedback<T>),
}

#[derive(Debug)]
pub enum PanelState<T> {
    Policy(Option<ChaCha8Rng>),
    Curvature(FeedbackState<T>),
}

impl<T: Scalar> ControlRule<T> for PanelRule<T> {
    type State = PanelState<T>;

    fn start(&self, path_index: u64) -> Self::State {
        match self {
            Self::Policy(p) => PanelState::Policy(p.start(path_index)),
            Self::Curvature(c) => PanelState::Curvature(c.start(path_index)),
        }
    }

    fn choose(&self, state: &mut Self::State, prefix: &PathView<'_, T>) -> Control<T> {
        match (self, state) {
            (Self::Policy(p), PanelState::Policy(s)) => p.choose(s, prefix),
            (Self::Curvature(c), PanelState::Curvature(s)) => c.choose(s, prefix),
            _ => unreachable!("state created by the same rule"),
        }
    }
}

/// The simulation rule for one panel control of a case.
pub fn panel_rule<T: Scalar>(
    control: PanelControl,
    case: &ItoCase<T>,
    u: &UncertaintySet<T>,
    seed: u64,
) -> Result<PanelRule<T>> {
    Ok(match control {
        PanelControl::Low => PanelRule::Policy(PolicyRule::Constant(extreme_control(u, false))),
        PanelControl::High => PanelRule::Policy(PolicyRule::Constant(extreme_control(u, true))),
        PanelControl::Curvature => PanelRule::Curvature(CurvatureFeedback::new(
            &case.phi,
            &case.coeffs,
            &case.x0,
            u,
        )?),
        PanelControl::RandomSwitching => PanelRule::Policy(PolicyRule::RandomSwitching {
            seed,
            choices: vec![extreme_control(u, false), extreme_control(u, true)],
        }),
    })
}

/// Refinement study settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceConfig<T> {
    pub horizon: T,
    /// Step counts of the uniform meshes, each double the previous one.
    pub mesh_steps: Vec<usize>,
    pub paths: usize,
    pub seed: u64,
    pub controls: Vec<PanelControl>,
}

impl<T: Scalar> ConvergenceConfig<T> {
    /// `T = 1`, meshes `2^-4 .. 2^-8`, all four panel controls.
    pub fn standard(paths: usize, seed: u64) -> Self {
        Self {
            horizon: T::one(),
            mesh_steps: vec![16, 32, 64, 128, 256],
            paths,
            seed,
            controls: PanelControl::ALL.to_vec(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.mesh_steps.len() < 3 {
            return invalid("at least three refinement levels are required");
        }
        if self.mesh_steps[0] == 0 || self.mesh_steps.windows(2).any(|w| w[1] != 2 * w[0]) {
            return invalid("each refinement level must halve the mesh");
        }
        if self.paths < 2 {
            return invalid("at least two paths are required");
        }
        if !(self.horizon > T::zero()) {
            return invalid("horizon must be positive");
        }
        if self.controls.is_empty() {
            return invalid("at least one control is required");
        }
        Ok(())
    }
}

/// `sqrt(mean((lhs - rhs)^2))` on one mesh under one control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualRow<T> {
    pub steps: usize,
    pub mesh: T,
    pub l2: T,
    /// Standard error of `l2` (delta method).
    pub se: T,
    /// Largest `|lhs - rhs|` over the paths.
    pub max_abs: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSeries<T> {
    pub control: PanelControl,
    pub rows: Vec<ResidualRow<T>>,
    /// Least-squares slope of `log l2` against `log mesh`; `None` when a
    /// residual is zero.
    pub order: Option<T>,
    /// Residuals nonincreasing along the refinement.
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable<T> {
    pub case: String,
    pub series: Vec<ControlSeries<T>>,
}

impl<T: Scalar> ConvergenceTable<T> {
    /// Smallest fitted order over the controls, if every order is defined.
    pub fn min_order(&self) -> Option<T> {
        self.series
            .iter()
            .map(|s| s.order)
            .try_fold(T::infinity(), |m, o| o.map(|o| m.min(o)))
    }

    pub fn all_monotone(&self) -> bool {
        self.series.iter().all(|s| s.monotone)
    }

    /// Largest residual over the controls and meshes.
    pub fn max_l2(&self) -> T {
        self.series
            .iter()
            .flat_map(|s| s.rows.iter().map(|r| r.l2))
            .fold(T::zero(), T::max)
    }
}

/// Least-squares slope of `y` on `x`.
pub fn fitted_slope<T: Scalar>(x: &[T], y: &[T]) -> T {
    let n = T::from_usize_lossy(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

/// Residual table of `case` on `[0, T]`. All meshes of one control share
/// the Brownian noise of the finest mesh.
pub fn residual_convergence<T: Scalar>(
    case: &ItoCase<T>,
    u: &UncertaintySet<T>,
    config: &ConvergenceConfig<T>,
) -> Result<ConvergenceTable<T>> {
    config.validate()?;
    case.phi.verify()?;
    let finest = *config.mesh_steps.last().expect("validated");
    let noise = Partition::uniform(config.horizon, finest)?;
    let mut series = Vec::with_capacity(config.controls.len());
    for &control in &config.controls {
        let rule = panel_rule(control, case, u, config.seed)?;
        let mut rows = Vec::with_capacity(config.mesh_steps.len());
        for &steps in &config.mesh_steps {
            let mesh = Partition::uniform(config.horizon, steps)?;
            case.coeffs.check_grid(&mesh)?;
            let grid = SimGrid::coupled(&mesh, &noise)?;
            let residuals = map_paths(u, &rule, &grid, config.seed, 0, config.paths, |p| {
                let v = p.view();
                let xp = build_path(&case.x0, &case.coeffs, &v)?;
                Ok(path_both_sides(&case.phi, &xp, &v, 0, steps)?.residual())
            })?
            .into_iter()
            .collect::<Result<Vec<T>>>()?;
            let squares: Vec<T> = residuals.iter().map(|r| r.powi(2)).collect();
            let max_abs = residuals.iter().fold(T::zero(), |m, r| m.max(r.abs()));
            let (mean, se) = mean_and_se(&squares);
            let l2 = mean.sqrt();
            let se = if l2 > T::zero() {
                se / (T::lit(2.0) * l2)
            } else {
                T::zero()
            };
            rows.push(ResidualRow {
                steps,
                mesh: mesh.mesh(),
                l2,
                se,
                max_abs,
            });
        }
        let monotone = rows.windows(2).all(|w| w[1].l2 <= w[0].l2);
        let order = if rows.iter().all(|r| r.l2 > T::zero() && r.l2.is_finite()) {
            let x: Vec<T> = rows.iter().map(|r| r.mesh.ln()).collect();
            let y: Vec<T> = rows.iter().map(|r| r.l2.ln()).collect();
            Some(fitted_slope(&x, &y))
        } else {
            None
        };
        series.push(ControlSeries {
            control,
            rows,
            order,
            monotone,
        });
    }
    Ok(ConvergenceTable {
        case: case.name.clone(),
        series,
    })
}
