//! Recombining lattice for the one-dimensional backward induction.
//!
//! When every volatility choice is an integer multiple `m_c * h` of a common
//! unit `h` and the partition is uniform, the children `B +- sigma_c sqrt(dt)`
//! of the scenario tree land on the lattice `j * h * sqrt(dt)`. For cylinder
//! payoffs the value of a node depends only on the frozen monitoring values
//! and the current lattice index, so the exponential tree collapses to a
//! polynomial recursion with identical values.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::sublinear::cylinder::Cylinder;
use crate::sublinear::partition::Partition;
use crate::sublinear::uncertainty::UncertaintySet;

/// Largest denominator tried when searching for a common volatility unit.
const MAX_UNIT_DENOMINATOR: usize = 64;

/// Default bound on lattice work (node updates).
pub const DEFAULT_WORK_BUDGET: f64 = 5e10;

#[derive(Debug, Clone)]
pub struct Lattice<T> {
    partition: Partition<T>,
    sigmas: Vec<T>,
    multiples: Vec<i64>,
    step: T,
    work_budget: f64,
}

impl<T: Scalar> Lattice<T> {
    /// Lattice for the default controls `{sigma_lo, sigma_hi}`.
    pub fn new(uncertainty: &UncertaintySet<T>, partition: &Partition<T>) -> Result<Self> {
        let (lo, hi) = uncertainty
            .interval_bounds()
            .ok_or_else(|| Error::InvalidArgument("lattice requires d = 1".into()))?;
        Self::with_sigmas(partition, if lo == hi { vec![hi] } else { vec![lo, hi] })
    }

    /// Lattice for an explicit set of commensurate volatilities.
    pub fn with_sigmas(partition: &Partition<T>, sigmas: Vec<T>) -> Result<Self> {
        if sigmas.is_empty() {
            return invalid("lattice needs at least one volatility");
        }
        if sigmas.iter().any(|&s| !(s >= T::zero()) || !s.is_finite()) {
            return invalid("volatilities must be finite and non-negative");
        }
        let dt = partition.dt(0);
        let tol = T::lit(1e-12);
        for k in 1..partition.steps() {
            if (partition.dt(k) - dt).abs() > tol * partition.horizon() {
                return invalid("lattice requires a uniform partition");
            }
        }
        let smallest = sigmas
            .iter()
            .copied()
            .filter(|&s| s > T::zero())
            .fold(T::infinity(), T::min);
        let (unit, multiples) = if smallest.is_infinite() {
            (T::one(), vec![0; sigmas.len()])
        } else {
            commensurate(&sigmas, smallest)
                .ok_or_else(|| Error::InvalidArgument("volatilities are not commensurate".into()))?
        };
        Ok(Self {
            partition: partition.clone(),
            sigmas,
            multiples,
            step: unit * dt.sqrt(),
            work_budget: DEFAULT_WORK_BUDGET,
        })
    }

    pub fn with_work_budget(mut self, budget: f64) -> Self {
        self.work_budget = budget;
        self
    }

    pub fn partition(&self) -> &Partition<T> {
        &self.partition
    }

    pub fn sigmas(&self) -> &[T] {
        &self.sigmas
    }

    /// Spacing `h sqrt(dt)` of the lattice.
    pub fn spacing(&self) -> T {
        self.step
    }

    fn max_multiple(&self) -> i64 {
        self.multiples.iter().copied().max().unwrap_or(0)
    }

    /// Upper expectation of a one-dimensional cylinder payoff.
    pub fn expectation(&self, payoff: &Cylinder<T>) -> Result<T> {
        self.conditional(payoff, 0, &[], T::zero())
    }

    /// Level-`level` value of `payoff` at a node whose monitoring values so
    /// far are `observed` (one per monitoring time `<= t_level`) and whose
    /// current value is `b`. `b` must lie on the lattice.
    pub fn conditional(
        &self,
        payoff: &Cylinder<T>,
        level: usize,
        observed: &[T],
        b: T,
    ) -> Result<T> {
        if payoff.dim() != 1 {
            return invalid("lattice handles one-dimensional payoffs only");
        }
        let levels = payoff.bind(&self.partition)?;
        if level > self.partition.steps() {
            return invalid("conditioning level beyond the horizon");
        }
        let seen = levels.iter().filter(|&&l| l <= level).count();
        if observed.len() != seen {
            return invalid(format!(
                "expected {seen} observed monitoring values, got {}",
                observed.len()
            ));
        }
        let jb = (b / self.step).round();
        if (jb * self.step - b).abs() > T::lit(1e-9) * (T::one() + b.abs()) {
            return invalid("current value is not a lattice point");
        }
        self.check_budget(&levels, level)?;
        let jb = jb.to_i64().expect("lattice index fits i64");
        let mut frozen = observed.to_vec();
        Ok(self.value_at(payoff, &levels, &mut frozen, jb, level))
    }

    fn check_budget(&self, levels: &[usize], level: usize) -> Result<()> {
        let k = self.max_multiple().max(1) as f64;
        let mut width = 1.0;
        let mut work = 0.0;
        let mut from = level as f64;
        for &l in levels.iter().filter(|&&l| l > level) {
            let m = l as f64 - from;
            work += width * m * (2.0 * k * m + 1.0) * self.multiples.len() as f64;
            width *= 2.0 * k * m + 1.0;
            from = l as f64;
        }
        if work > self.work_budget {
            return Err(Error::Size {
                what: "lattice node updates",
                required: work.min(usize::MAX as f64) as usize,
                bound: self.work_budget as usize,
            });
        }
        Ok(())
    }

    fn value_at(
        &self,
        payoff: &Cylinder<T>,
        levels: &[usize],
        frozen: &mut Vec<T>,
        jb: i64,
        level: usize,
    ) -> T {
        let stage = frozen.len();
        if stage == levels.len() {
            return payoff.eval_values(frozen);
        }
        let target = levels[stage];
        let m = (target - level) as i64;
        let radius = self.max_multiple() * m;
        let width = (2 * radius + 1) as usize;
        let step = self.step;
        let leaf = |j: i64, frozen: &mut Vec<T>| {
            let idx = jb + j;
            frozen.push(T::from_i64(idx).expect("index representable") * step);
            let v = self.value_at(payoff, levels, frozen, idx, target);
            frozen.pop();
            v
        };
        let mut values: Vec<T> = if stage + 1 == levels.len() || width < 64 {
            (0..width)
                .map(|i| leaf(i as i64 - radius, frozen))
                .collect()
        } else {
            let base = frozen.clone();
            (0..width)
                .into_par_iter()
                .map(|i| {
                    let mut local = base.clone();
                    leaf(i as i64 - radius, &mut local)
                })
                .collect()
        };
        let half = T::lit(0.5);
        let mut r = radius;
        let km = self.max_multiple();
        for _ in 0..m {
            let nr = r - km;
            let next: Vec<T> = (-nr..=nr)
                .map(|j| {
                    let mut best = T::neg_infinity();
                    for &mc in &self.multiples {
                        let up = values[(j + mc + r) as usize];
                        let down = values[(j - mc + r) as usize];
                        best = best.max((T::zero() + up + down) * half);
                    }
                    best
                })
                .collect();
            values = next;
            r = nr;
        }
        values[0]
    }
}

fn commensurate<T: Scalar>(sigmas: &[T], smallest: T) -> Option<(T, Vec<i64>)> {
    let tol = T::lit(1e-9);
    (1..=MAX_UNIT_DENOMINATOR).find_map(|q| {
        let unit = smallest / T::from_usize_lossy(q);
        let multiples: Option<Vec<i64>> = sigmas
            .iter()
            .map(|&s| {
                let r = (s / unit).round();
                ((r * unit - s).abs() <= tol * (T::one() + s)).then(|| r.to_i64().unwrap_or(0))
            })
            .collect();
        multiples.map(|m| (unit, m))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sublinear::tree::{upper_expectation, ScenarioTree, TreeConfig};

    fn u() -> UncertaintySet<f64> {
        UncertaintySet::interval(0.5, 1.0).unwrap()
    }

    #[test]
    fn matches_full_tree_single_time() {
        for n in 1..=6 {
            let p = Partition::uniform(1.0, n).unwrap();
            let tree = ScenarioTree::with_defaults(&u(), &p).unwrap();
            let lat = Lattice::new(&u(), &p).unwrap();
            for payoff in [
                Cylinder::of_values(vec![1.0], |x: &[f64]| x[0].abs()).unwrap(),
                Cylinder::of_values(vec![1.0], |x: &[f64]| x[0].powi(3) - x[0].powi(2)).unwrap(),
                Cylinder::of_values(vec![1.0], |x: &[f64]| (2.0 * x[0]).sin()).unwrap(),
            ] {
                let a = upper_expectation(&tree, &payoff).unwrap();
                let b = lat.expectation(&payoff).unwrap();
                assert!((a - b).abs() < 1e-12, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn matches_full_tree_two_times() {
        let p = Partition::uniform(1.0, 6).unwrap();
        let tree = ScenarioTree::with_defaults(&u(), &p).unwrap();
        let lat = Lattice::new(&u(), &p).unwrap();
        let payoff = Cylinder::of_values(vec![0.5, 1.0], |x: &[f64]| {
            (x[0] * 2.0).cos() * x[1] - (x[1] - x[0]).abs()
        })
        .unwrap();
        let a = upper_expectation(&tree, &payoff).unwrap();
        let b = lat.expectation(&payoff).unwrap();
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn matches_sigma_grid_tree() {
        let p = Partition::uniform(1.0, 4).unwrap();
        let cfg = TreeConfig::sigma_grid(&u(), 3).unwrap();
        let tree = ScenarioTree::build(&u(), &p, &cfg).unwrap();
        let lat = Lattice::with_sigmas(&p, vec![0.5, 0.75, 1.0]).unwrap();
        let payoff = Cylinder::of_values(vec![1.0], |x: &[f64]| (3.0 * x[0]).sin()).unwrap();
        let a = upper_expectation(&tree, &payoff).unwrap();
        let b = lat.expectation(&payoff).unwrap();
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn conditional_matches_tree_nodes() {
        let p = Partition::uniform(1.0, 4).unwrap();
        let tree = ScenarioTree::with_defaults(&u(), &p).unwrap();
        let lat = Lattice::new(&u(), &p).unwrap();
        let payoff =
            Cylinder::of_values(vec![0.5, 1.0], |x: &[f64]| x[0] * x[1] - x[1].powi(4)).unwrap();
        let nf = crate::sublinear::tree::conditional_value(&tree, &payoff, 0.75).unwrap();
        for i in 0..tree.level_size(3) {
            let b = tree.node_b(3, i, 0);
            let x1 = tree.node_b(2, tree.ancestor(3, i, 2), 0);
            let v = lat.conditional(&payoff, 3, &[x1], b).unwrap();
            assert!((v - nf.values[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_incommensurate_and_nonuniform() {
        let p = Partition::uniform(1.0, 4).unwrap();
        assert!(Lattice::with_sigmas(&p, vec![1.0, std::f64::consts::SQRT_2]).is_err());
        let q = Partition::from_times(vec![0.0, 0.3, 1.0]).unwrap();
        assert!(Lattice::new(&u(), &q).is_err());
    }

    #[test]
    fn fine_lattice_square() {
        let p = Partition::uniform(1.0, 1024).unwrap();
        let lat = Lattice::new(&u(), &p).unwrap();
        let sq = Cylinder::of_values(vec![1.0], |x: &[f64]| x[0] * x[0]).unwrap();
        assert!((lat.expectation(&sq).unwrap() - 1.0).abs() < 1e-10);
    }
}
