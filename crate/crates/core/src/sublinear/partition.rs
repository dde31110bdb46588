use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Relative tolerance used when matching a time against grid points.
const ON_GRID_TOL: f64 = 1e-12;

/// Ordered grid `0 = t_0 < t_1 < ... < t_N = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition<T> {
    times: Vec<T>,
}

impl<T: Scalar> Partition<T> {
    pub fn from_times(times: Vec<T>) -> Result<Self> {
        if times.len() < 2 {
            return invalid("partition needs at least one step (N >= 1)");
        }
        if times[0] != T::zero() {
            return invalid("partition must start at 0");
        }
        if times.iter().any(|t| !t.is_finite()) {
            return invalid("partition times must be finite");
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("partition times must be strictly increasing");
        }
        Ok(Self { times })
    }

    /// `N` equal steps on `[0, horizon]`.
    pub fn uniform(horizon: T, steps: usize) -> Result<Self> {
        if steps == 0 {
            return invalid("partition needs at least one step (N >= 1)");
        }
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return invalid("horizon must be positive and finite");
        }
        let n = T::from_usize_lossy(steps);
        let mut times: Vec<T> = (0..=steps)
            .map(|k| horizon * T::from_usize_lossy(k) / n)
            .collect();
        times[steps] = horizon;
        Self::from_times(times)
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> T {
        self.times[self.steps()]
    }

    pub fn dt(&self, k: usize) -> T {
        self.times[k + 1] - self.times[k]
    }

    /// Mesh `max_k (t_{k+1} - t_k)`.
    pub fn mesh(&self) -> T {
        (0..self.steps())
            .map(|k| self.dt(k))
            .fold(T::zero(), T::max)
    }

    /// Index of `t` when it is a grid point (to relative round-off).
    pub fn index_of(&self, t: T) -> Option<usize> {
        let tol = T::lit(ON_GRID_TOL) * (T::one() + self.horizon());
        let pos = self.times.partition_point(|&s| s < t - tol);
        (pos < self.times.len() && (self.times[pos] - t).abs() <= tol).then_some(pos)
    }

    pub fn require_index(&self, t: T) -> Result<usize> {
        self.index_of(t)
            .ok_or_else(|| crate::Error::InvalidArgument(format!("time {t} is not a grid point")))
    }

    /// Smallest grid time `>= t`, or the horizon when `t` lies beyond it.
    pub fn round_up(&self, t: T) -> T {
        if let Some(i) = self.index_of(t) {
            return self.times[i];
        }
        let pos = self.times.partition_point(|&s| s < t);
        if pos >= self.times.len() {
            self.horizon()
        } else {
            self.times[pos]
        }
    }

    /// Largest grid index whose time is `<= t`.
    pub fn floor_index(&self, t: T) -> usize {
        if let Some(i) = self.index_of(t) {
            return i;
        }
        self.times.partition_point(|&s| s <= t).saturating_sub(1)
    }

    /// Partition with every step split in two.
    pub fn refine(&self) -> Self {
        let mut times = Vec::with_capacity(2 * self.times.len() - 1);
        for w in self.times.windows(2) {
            times.push(w[0]);
            times.push(w[0] + (w[1] - w[0]) * T::lit(0.5));
        }
        times.push(self.horizon());
        Self { times }
    }

    /// Maps each grid point of `self` to its index in `finer`, which must
    /// contain every point of `self` and share the horizon.
    pub fn embed_in(&self, finer: &Partition<T>) -> Result<Vec<usize>> {
        let tol = T::lit(ON_GRID_TOL) * (T::one() + self.horizon());
        if (self.horizon() - finer.horizon()).abs() > tol {
            return invalid(format!(
                "grid mismatch: horizons {} and {} differ",
                self.horizon(),
                finer.horizon()
            ));
        }
        self.times
            .iter()
            .map(|&t| {
                finer.index_of(t).ok_or_else(|| {
                    crate::Error::InvalidArgument(format!(
                        "grid mismatch: time {t} is not on the finer grid"
                    ))
                })
            })
            .collect()
    }
}
