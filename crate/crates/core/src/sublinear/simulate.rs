//! Monte-Carlo paths of `(B, <B>)` under one adapted volatility control.
//!
//! Path `i` draws its Gaussian noise from a ChaCha8 generator seeded with
//! `seed` on stream `i`, so every path is reproducible on its own and the
//! bundle does not depend on the order in which paths are produced. Noise is
//! generated on a (possibly finer) noise grid and aggregated per step, which
//! couples simulations of one seed across nested partitions.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::scalar::{Scalar, Vec2};
use crate::sublinear::partition::Partition;
use crate::sublinear::path::{qv_dim, qv_slot, PathView};
use crate::sublinear::uncertainty::{Control, ResolvedControl, UncertaintySet};

/// Adapted rule choosing the control for the step that starts at the end
/// of `prefix`.
pub trait ControlRule<T: Scalar>: Sync {
    type State: Send;

    fn start(&self, path_index: u64) -> Self::State;

    fn choose(&self, state: &mut Self::State, prefix: &PathView<'_, T>) -> Control<T>;
}

/// Keeps switching draws independent of the path noise of the same seed.
const SWITCHING_SEED_SALT: u64 = 0x5157_4954_4348_494e;

type FeedbackFn<T> = Arc<dyn Fn(&PathView<'_, T>) -> Control<T> + Send + Sync>;

/// Built-in control rules.
#[derive(Clone)]
pub enum PolicyRule<T> {
    Constant(Control<T>),
    /// One control per step of the simulation partition.
    Table(Vec<Control<T>>),
    /// Stateless function of the path prefix.
    Feedback(FeedbackFn<T>),
    /// Independent uniform draw from `choices` at every step.
    RandomSwitching {
        seed: u64,
        choices: Vec<Control<T>>,
    },
}

impl<T: fmt::Debug> fmt::Debug for PolicyRule<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Self::Table(t) => f.debug_tuple("Table").field(t).finish(),
            Self::Feedback(_) => f.write_str("Feedback(..)"),
            Self::RandomSwitching { seed, choices } => f
                .debug_struct("RandomSwitching")
                .field("seed", seed)
                .field("choices", choices)
                .finish(),
        }
    }
}

impl<T: Scalar> PolicyRule<T> {
    pub fn feedback(f: impl Fn(&PathView<'_, T>) -> Control<T> + Send + Sync + 'static) -> Self {
        Self::Feedback(Arc::new(f))
    }

    /// Resolves a rule by name: `sigma_lo`, `sigma_hi`, `theta_<i>` or
    /// `random_switching`.
    pub fn named(name: &str, uncertainty: &UncertaintySet<T>, seed: u64) -> Result<Self> {
        let interval = uncertainty.interval_bounds();
        match (name, interval) {
            ("sigma_lo", Some((lo, _))) => Ok(Self::Constant(Control::Sigma(lo))),
            ("sigma_hi", Some((_, hi))) => Ok(Self::Constant(Control::Sigma(hi))),
            ("random_switching", _) => Ok(Self::RandomSwitching {
                seed,
                choices: uncertainty.default_controls(),
            }),
            _ => {
                if let (Some(idx), None) = (name.strip_prefix("theta_"), interval) {
                    if let Ok(i) = idx.parse::<usize>() {
                        let c = Control::Theta(i);
                        uncertainty.resolve(c)?;
                        return Ok(Self::Constant(c));
                    }
                }
                invalid(format!("unknown control rule '{name}'"))
            }
        }
    }
}

impl<T: Scalar> ControlRule<T> for PolicyRule<T> {
    type State = Option<ChaCha8Rng>;

    fn start(&self, path_index: u64) -> Self::State {
        match self {
            Self::RandomSwitching { seed, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SWITCHING_SEED_SALT);
                rng.set_stream(path_index);
                Some(rng)
            }
            _ => None,
        }
    }

    fn choose(&self, state: &mut Self::State, prefix: &PathView<'_, T>) -> Control<T> {
        match self {
            Self::Constant(c) => *c,
            Self::Table(t) => t[prefix.last()],
            Self::Feedback(f) => f(prefix),
            Self::RandomSwitching { choices, .. } => {
                let rng = state.as_mut().expect("switching state");
                choices[rng.random_range(0..choices.len())]
            }
        }
    }
}

/// Simulation grid plus the noise grid the Gaussian increments are drawn on.
#[derive(Debug, Clone)]
pub struct SimGrid<T> {
    partition: Partition<T>,
    noise: Partition<T>,
    embed: Vec<usize>,
}

impl<T: Scalar> SimGrid<T> {
    pub fn new(partition: &Partition<T>) -> Self {
        Self {
            partition: partition.clone(),
            noise: partition.clone(),
            embed: (0..=partition.steps()).collect(),
        }
    }

    /// Draws noise on `noise`, which must refine `partition`.
    pub fn coupled(partition: &Partition<T>, noise: &Partition<T>) -> Result<Self> {
        Ok(Self {
            partition: partition.clone(),
            noise: noise.clone(),
            embed: partition.embed_in(noise)?,
        })
    }

    pub fn partition(&self) -> &Partition<T> {
        &self.partition
    }

    pub fn noise(&self) -> &Partition<T> {
        &self.noise
    }
}

/// One simulated path with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath<T> {
    pub times: Vec<T>,
    pub dim: usize,
    pub b: Vec<T>,
    pub qv: Vec<T>,
    pub controls: Vec<Control<T>>,
    pub seed: u64,
    pub index: u64,
}

impl<T: Scalar> SamplePath<T> {
    pub fn view(&self) -> PathView<'_, T> {
        PathView::new(&self.times, self.dim, &self.b, &self.qv)
    }
}

/// Simulates path `index` of the stream family `seed`.
pub fn simulate_path<T: Scalar, R: ControlRule<T>>(
    uncertainty: &UncertaintySet<T>,
    rule: &R,
    grid: &SimGrid<T>,
    seed: u64,
    index: u64,
) -> Result<SamplePath<T>> {
    let dim = uncertainty.dim();
    let q = qv_dim(dim);
    let n = grid.partition.steps();
    let times = grid.partition.times().to_vec();
    let mut b = Vec::with_capacity((n + 1) * dim);
    let mut qv = Vec::with_capacity((n + 1) * q);
    b.resize(dim, T::zero());
    qv.resize(q, T::zero());
    let mut controls = Vec::with_capacity(n);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut state = rule.start(index);
    let mut cache: Vec<ResolvedControl<T>> = Vec::new();

    for k in 0..n {
        let control = {
            let view = PathView::new(&times[..=k], dim, &b, &qv);
            rule.choose(&mut state, &view)
        };
        let rc = match cache.iter().find(|r| r.control == control) {
            Some(r) => *r,
            None => {
                let r = uncertainty.resolve(control)?;
                cache.push(r);
                r
            }
        };
        let mut dw: Vec2<T> = [T::zero(); 2];
        for j in grid.embed[k]..grid.embed[k + 1] {
            let sq = grid.noise.dt(j).sqrt();
            for w in dw.iter_mut().take(dim) {
                let z: f64 = rng.sample(StandardNormal);
                *w += T::from_f64(z).expect("normal draw representable") * sq;
            }
        }
        let dt = grid.partition.dt(k);
        for c in 0..dim {
            let inc = (0..dim).fold(T::zero(), |acc, j| acc + rc.root[c][j] * dw[j]);
            let prev = b[k * dim + c];
            b.push(prev + inc);
        }
        for slot in 0..q {
            let (i, j) = slot_pair(dim, slot);
            let prev = qv[k * q + slot];
            qv.push(prev + rc.cov[i][j] * dt);
        }
        controls.push(control);
    }
    Ok(SamplePath {
        times,
        dim,
        b,
        qv,
        controls,
        seed,
        index,
    })
}

fn slot_pair(dim: usize, slot: usize) -> (usize, usize) {
    debug_assert_eq!(qv_slot(dim, 0, 0), 0);
    match slot {
        0 => (0, 0),
        1 => (0, 1),
        _ => (1, 1),
    }
}

/// Simulates paths `first..first + count` in parallel and maps each through
/// `f` without retaining it. Results are in path order.
pub fn map_paths<T, R, F, O>(
    uncertainty: &UncertaintySet<T>,
    rule: &R,
    grid: &SimGrid<T>,
    seed: u64,
    first: u64,
    count: usize,
    f: F,
) -> Result<Vec<O>>
where
    T: Scalar,
    R: ControlRule<T>,
    F: Fn(&SamplePath<T>) -> O + Sync,
    O: Send,
{
    (0..count as u64)
        .into_par_iter()
        .map(|i| simulate_path(uncertainty, rule, grid, seed, first + i).map(|p| f(&p)))
        .collect()
}

/// Bundle of `M` paths under one control rule.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle<T> {
    pub partition: Partition<T>,
    pub seed: u64,
    pub paths: Vec<SamplePath<T>>,
}

/// Simulates `m` paths with indices `0..m`.
pub fn simulate_paths<T: Scalar, R: ControlRule<T>>(
    uncertainty: &UncertaintySet<T>,
    rule: &R,
    grid: &SimGrid<T>,
    m: usize,
    seed: u64,
) -> Result<PathBundle<T>> {
    if m == 0 {
        return invalid("path count must be at least 1");
    }
    let paths = map_paths(uncertainty, rule, grid, seed, 0, m, |p| p.clone())?;
    Ok(PathBundle {
        partition: grid.partition.clone(),
        seed,
        paths,
    })
}

impl<T: Scalar> PathBundle<T> {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.paths.first().map_or(1, |p| p.dim)
    }

    pub fn view(&self, i: usize) -> PathView<'_, T> {
        self.paths[i].view()
    }

    /// Compensator increment of `<B^p, B^q>` over step `k` of path `i`,
    /// read from the control trace.
    pub fn qv_increment(
        &self,
        uncertainty: &UncertaintySet<T>,
        i: usize,
        k: usize,
        p: usize,
        q: usize,
    ) -> Result<T> {
        let rc = uncertainty.resolve(self.paths[i].controls[k])?;
        Ok(rc.cov[p][q] * self.partition.dt(k))
    }

    /// Realised quadratic variation `sum (dB)^2` of component `c` on path `i`.
    pub fn realized_qv(&self, i: usize, c: usize) -> T {
        let v = self.view(i);
        (0..v.last()).map(|k| v.db(k, c) * v.db(k, c)).sum()
    }

    /// Checks the path invariants: nondecreasing `<B^c>`, compensator
    /// increments inside the variance envelope, and agreement of the
    /// stored accumulator with the control trace.
    pub fn check_invariants(&self, uncertainty: &UncertaintySet<T>) -> Result<()> {
        let dim = uncertainty.dim();
        let (lo, hi) = variance_envelope(uncertainty);
        for (i, path) in self.paths.iter().enumerate() {
            let v = path.view();
            for k in 0..v.last() {
                let dt = self.partition.dt(k);
                for c in 0..dim {
                    let inc = self.qv_increment(uncertainty, i, k, c, c)?;
                    if inc < lo[c] * dt || inc > hi[c] * dt {
                        return Err(Error::Validation(format!(
                            "path {i} step {k}: <B> increment {inc} outside envelope"
                        )));
                    }
                    if v.qv(k + 1, c, c) < v.qv(k, c, c) {
                        return Err(Error::Validation(format!(
                            "path {i} step {k}: <B> decreases"
                        )));
                    }
                    let drift = (v.dqv(k, c, c) - inc).abs();
                    let tol = T::epsilon() * T::lit(8.0) * (T::one() + v.qv(k + 1, c, c));
                    if drift > tol {
                        return Err(Error::Validation(format!(
                            "path {i} step {k}: accumulator drift {drift}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Per-component bounds on the variance rate.
pub fn variance_envelope<T: Scalar>(u: &UncertaintySet<T>) -> (Vec2<T>, Vec2<T>) {
    if let Some((lo, hi)) = u.interval_bounds() {
        return ([lo * lo, T::zero()], [hi * hi, T::zero()]);
    }
    let theta = u.theta().expect("covariance set");
    let mut lo = [T::infinity(); 2];
    let mut hi = [T::neg_infinity(); 2];
    for q in theta {
        for c in 0..2 {
            lo[c] = lo[c].min(q[c][c]);
            hi[c] = hi[c].max(q[c][c]);
        }
    }
    (lo, hi)
}

/// Sample mean and standard error, summed in index order.
pub fn mean_and_se<T: Scalar>(values: &[T]) -> (T, T) {
    let n = T::from_usize_lossy(values.len());
    let mean = values.iter().copied().fold(T::zero(), |a, x| a + x) / n;
    if values.len() < 2 {
        return (mean, T::zero());
    }
    let var = values
        .iter()
        .map(|&x| (x - mean) * (x - mean))
        .fold(T::zero(), |a, x| a + x)
        / (n - T::one());
    (mean, (var / n).sqrt())
}
