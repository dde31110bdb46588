//! Cylinder functionals `phi(B_{t_1}, ..., B_{t_n})`.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::sublinear::partition::Partition;
use crate::sublinear::path::PathView;

/// Whether the function receives `B_{t_i}` or the increments `B_{t_i} - B_{t_{i-1}}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinates {
    Values,
    Increments,
}

type CylFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// A functional of `B` observed at finitely many monitoring times.
///
/// For `dim = 2` the argument is flattened time-major:
/// `[x_1^1, x_1^2, x_2^1, x_2^2, ...]`.
#[derive(Clone)]
pub struct Cylinder<T> {
    times: Vec<T>,
    coords: Coordinates,
    dim: usize,
    func: CylFn<T>,
}

impl<T: fmt::Debug> fmt::Debug for Cylinder<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Cylinder")
            .field("times", &self.times)
            .field("coords", &self.coords)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> Cylinder<T> {
    fn new(times: Vec<T>, coords: Coordinates, func: CylFn<T>) -> Result<Self> {
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("monitoring times must be strictly increasing");
        }
        if times.iter().any(|&t| !(t > T::zero()) || !t.is_finite()) {
            return invalid("monitoring times must be positive and finite");
        }
        Ok(Self {
            times,
            coords,
            dim: 1,
            func,
        })
    }

    /// `phi(B_{t_1}, ..., B_{t_n})`.
    pub fn of_values(times: Vec<T>, f: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Result<Self> {
        Self::new(times, Coordinates::Values, Arc::new(f))
    }

    /// `phi(B_{t_1} - B_{t_0}, ..., B_{t_n} - B_{t_{n-1}})`.
    pub fn of_increments(
        times: Vec<T>,
        f: impl Fn(&[T]) -> T + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(times, Coordinates::Increments, Arc::new(f))
    }

    /// Deterministic payoff `c`.
    pub fn constant(c: T) -> Self {
        Self {
            times: Vec::new(),
            coords: Coordinates::Values,
            dim: 1,
            func: Arc::new(move |_| c),
        }
    }

    /// Declares the number of components read per monitoring time.
    pub fn with_dim(mut self, dim: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return invalid("cylinder dimension must be 1 or 2");
        }
        self.dim = dim;
        Ok(self)
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coordinates(&self) -> Coordinates {
        self.coords
    }

    /// Post-composition `g(phi(..))`.
    pub fn map(&self, g: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        let f = self.func.clone();
        Self {
            times: self.times.clone(),
            coords: self.coords,
            dim: self.dim,
            func: Arc::new(move |x| g(f(x))),
        }
    }

    /// Evaluates at monitoring values `B_{t_i}` (flattened).
    pub fn eval_values(&self, values: &[T]) -> T {
        match self.coords {
            Coordinates::Values => (self.func)(values),
            Coordinates::Increments => {
                let inc = differences(values, self.dim);
                (self.func)(&inc)
            }
        }
    }

    /// Evaluates at increments `B_{t_i} - B_{t_{i-1}}` (flattened).
    pub fn eval_increments(&self, increments: &[T]) -> T {
        match self.coords {
            Coordinates::Increments => (self.func)(increments),
            Coordinates::Values => {
                let vals = cumulative(increments, self.dim);
                (self.func)(&vals)
            }
        }
    }

    /// Grid indices of the monitoring times.
    pub fn bind(&self, partition: &Partition<T>) -> Result<Vec<usize>> {
        self.times
            .iter()
            .map(|&t| {
                partition.index_of(t).ok_or_else(|| {
                    crate::Error::InvalidArgument(format!(
                        "monitoring time {t} is not on the partition grid"
                    ))
                })
            })
            .collect()
    }

    /// Evaluates on a path given grid indices from [`Cylinder::bind`].
    pub fn eval_on_path(&self, levels: &[usize], path: &PathView<'_, T>) -> T {
        let mut vals = Vec::with_capacity(levels.len() * self.dim);
        for &l in levels {
            for c in 0..self.dim {
                vals.push(path.b(l, c));
            }
        }
        self.eval_values(&vals)
    }
}

fn differences<T: Scalar>(values: &[T], dim: usize) -> Vec<T> {
    let mut out = values.to_vec();
    for i in (dim..values.len()).rev() {
        out[i] = values[i] - values[i - dim];
    }
    out
}

fn cumulative<T: Scalar>(increments: &[T], dim: usize) -> Vec<T> {
    let mut out = increments.to_vec();
    for i in dim..out.len() {
        out[i] = out[i] + out[i - dim];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_conversion() {
        let v = Cylinder::of_values(vec![0.5, 1.0], |x: &[f64]| x[0] * 10.0 + x[1]).unwrap();
        // increments (1, 2) are values (1, 3)
        assert_eq!(v.eval_increments(&[1.0, 2.0]), 13.0);
        let i = Cylinder::of_increments(vec![0.5, 1.0], |x: &[f64]| x[0] * 10.0 + x[1]).unwrap();
        assert_eq!(i.eval_values(&[1.0, 3.0]), 12.0);
    }

    #[test]
    fn rejects_unordered_times() {
        assert!(Cylinder::of_values(vec![1.0, 0.5], |_: &[f64]| 0.0).is_err());
        assert!(Cylinder::of_values(vec![0.0], |_: &[f64]| 0.0).is_err());
    }

    #[test]
    fn off_grid_binding_fails() {
        let p = Partition::uniform(1.0, 4).unwrap();
        let c = Cylinder::of_values(vec![0.3], |x: &[f64]| x[0]).unwrap();
        assert!(matches!(c.bind(&p), Err(crate::Error::InvalidArgument(_))));
        let c = Cylinder::of_values(vec![0.25, 1.0], |x: &[f64]| x[0]).unwrap();
        assert_eq!(c.bind(&p).unwrap(), vec![1, 4]);
    }
}
