//! Simple processes `eta_t = sum_k xi_k 1_{[t_k, t_{k+1})}(t)`.

use std::cell::Cell;
use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::ito::stopping::StoppingTime;
use crate::scalar::Scalar;
use crate::sublinear::partition::Partition;
use crate::sublinear::path::PathView;
use crate::sublinear::tree::NodeFunction;

/// `xi_k` as a function of the step index and the path prefix up to `t_k`.
pub type AdaptedFn<T> = Arc<dyn Fn(usize, &PathView<'_, T>) -> T + Send + Sync>;
type MapFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;
type ZipFn<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

#[derive(Clone)]
enum Source<T> {
    /// Tree mode: `xi_k` is a node function on the tree level of `t_k`.
    Nodes(Arc<Vec<NodeFunction<T>>>),
    /// Path mode.
    Adapted(AdaptedFn<T>),
    Map(Box<SimpleProcess<T>>, MapFn<T>),
    Zip(Box<SimpleProcess<T>>, Box<SimpleProcess<T>>, ZipFn<T>),
    /// `1_{[0, tau]} eta`, simple on the grid of the path it is evaluated on.
    Truncated(Box<SimpleProcess<T>>, StoppingTime<T>),
}

/// A step process on a partition.
#[derive(Clone)]
pub struct SimpleProcess<T> {
    partition: Partition<T>,
    source: Source<T>,
}

impl<T: fmt::Debug> fmt::Debug for SimpleProcess<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.source {
            Source::Nodes(_) => "nodes",
            Source::Adapted(_) => "adapted",
            Source::Map(..) => "map",
            Source::Zip(..) => "zip",
            Source::Truncated(..) => "truncated",
        };
        f.debug_struct("SimpleProcess")
            .field("partition", &self.partition)
            .field("kind", &kind)
            .finish()
    }
}

impl<T: Scalar> SimpleProcess<T> {
    /// Path-mode process; `f(k, prefix)` sees the path up to `t_k` only.
    pub fn adapted(
        partition: &Partition<T>,
        f: impl Fn(usize, &PathView<'_, T>) -> T + Send + Sync + 'static,
    ) -> Self {
        Self {
            partition: partition.clone(),
            source: Source::Adapted(Arc::new(f)),
        }
    }

    pub fn constant(partition: &Partition<T>, c: T) -> Self {
        Self::adapted(partition, move |_, _| c)
    }

    /// Deterministic step function with one value per step.
    pub fn steps(partition: &Partition<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != partition.steps() {
            return invalid("one value per partition step is required");
        }
        Ok(Self::adapted(partition, move |k, _| values[k]))
    }

    /// Left-endpoint process `xi_k = B^c_{t_k}`.
    pub fn brownian(partition: &Partition<T>, component: usize) -> Self {
        Self::adapted(partition, move |_, p| p.b(p.last(), component))
    }

    /// Tree-mode process. `nodes[k]` must live on the tree level of `t_k`,
    /// which is checked when the process is evaluated on a tree path.
    pub fn from_nodes(partition: &Partition<T>, nodes: Vec<NodeFunction<T>>) -> Result<Self> {
        if nodes.len() != partition.steps() {
            return invalid("one node function per partition step is required");
        }
        Ok(Self {
            partition: partition.clone(),
            source: Source::Nodes(Arc::new(nodes)),
        })
    }

    pub fn partition(&self) -> &Partition<T> {
        &self.partition
    }

    pub fn map(&self, f: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Self {
            partition: self.partition.clone(),
            source: Source::Map(Box::new(self.clone()), Arc::new(f)),
        }
    }

    /// Pointwise combination of two processes on the same partition.
    pub fn zip(&self, other: &Self, f: impl Fn(T, T) -> T + Send + Sync + 'static) -> Result<Self> {
        if self.partition != other.partition {
            return invalid("grid mismatch: processes live on different partitions");
        }
        Ok(Self {
            partition: self.partition.clone(),
            source: Source::Zip(Box::new(self.clone()), Box::new(other.clone()), Arc::new(f)),
        })
    }

    /// `alpha * self + other`.
    pub fn axpy(&self, alpha: T, other: &Self) -> Result<Self> {
        self.zip(other, move |a, b| alpha * a + b)
    }

    /// `1_{[0, tau]} eta`: the value at path time `s` is kept iff `s < tau`.
    pub fn truncate(&self, tau: &StoppingTime<T>) -> Self {
        Self {
            partition: self.partition.clone(),
            source: Source::Truncated(Box::new(self.clone()), tau.clone()),
        }
    }

    /// Binds the process to one path.
    pub fn bind<'a>(&'a self, path: &PathView<'a, T>) -> Result<Bound<'a, T>> {
        let at = embed_prefix(self.partition.times(), path)?;
        let mut step_of = Vec::with_capacity(path.len());
        let mut k = 0;
        for j in 0..path.len() {
            while k + 1 < at.len() && at[k + 1] <= j {
                k += 1;
            }
            step_of.push(k);
        }
        let prepared = prepare(self, path);
        Ok(Bound {
            path: *path,
            at,
            step_of,
            prepared,
        })
    }
}

/// Path indices of the process grid points up to the end of `path`.
fn embed_prefix<T: Scalar>(coarse: &[T], path: &PathView<'_, T>) -> Result<Vec<usize>> {
    let now = path.now();
    let tol = T::lit(1e-12) * (T::one() + now.abs());
    let mut at = Vec::with_capacity(coarse.len());
    let mut j = 0;
    for &t in coarse {
        if t > now + tol {
            break;
        }
        while j < path.len() && path.time(j) < t - tol {
            j += 1;
        }
        if j == path.len() || (path.time(j) - t).abs() > tol {
            return invalid(format!(
                "grid mismatch: process time {t} is not a path grid point"
            ));
        }
        at.push(j);
    }
    if at.is_empty() {
        return invalid("grid mismatch: process grid does not start at the path start");
    }
    Ok(at)
}

enum Prepared<'a, T> {
    Nodes(&'a [NodeFunction<T>]),
    Adapted(&'a AdaptedFn<T>, Cell<Option<(usize, T)>>),
    Map(Box<Prepared<'a, T>>, &'a MapFn<T>),
    Zip(Box<Prepared<'a, T>>, Box<Prepared<'a, T>>, &'a ZipFn<T>),
    Truncated(Box<Prepared<'a, T>>, usize),
}

fn prepare<'a, T: Scalar>(p: &'a SimpleProcess<T>, path: &PathView<'a, T>) -> Prepared<'a, T> {
    match &p.source {
        Source::Nodes(n) => Prepared::Nodes(n),
        Source::Adapted(f) => Prepared::Adapted(f, Cell::new(None)),
        Source::Map(inner, f) => Prepared::Map(Box::new(prepare(inner, path)), f),
        Source::Zip(a, b, f) => {
            Prepared::Zip(Box::new(prepare(a, path)), Box::new(prepare(b, path)), f)
        }
        Source::Truncated(inner, tau) => {
            let stop = tau.first_index(path).unwrap_or(usize::MAX);
            Prepared::Truncated(Box::new(prepare(inner, path)), stop)
        }
    }
}

/// A process bound to one path: coefficient lookup per path step.
pub struct Bound<'a, T> {
    path: PathView<'a, T>,
    at: Vec<usize>,
    step_of: Vec<usize>,
    prepared: Prepared<'a, T>,
}

impl<T: Scalar> Bound<'_, T> {
    /// Number of path steps covered.
    pub fn path_steps(&self) -> usize {
        self.step_of.len() - 1
    }

    /// Process step containing path step `j`.
    pub fn step_of(&self, j: usize) -> usize {
        self.step_of[j]
    }

    /// Path index of process grid point `k`.
    pub fn grid_index(&self, k: usize) -> usize {
        self.at[k]
    }

    /// Coefficient in force on path step `j`. `j` may equal the last index
    /// of the view: the step starting there is decided by the prefix.
    pub fn value(&self, j: usize) -> T {
        self.eval(&self.prepared, j)
    }

    fn eval(&self, p: &Prepared<'_, T>, j: usize) -> T {
        match p {
            Prepared::Nodes(nodes) => {
                let k = self.step_of[j];
                let i = self.at[k];
                let f = &nodes[k];
                assert_eq!(
                    f.level, i,
                    "node function level does not match its grid time"
                );
                let node = self
                    .path
                    .node(i)
                    .expect("tree-mode process needs a tree path");
                f.values[node]
            }
            Prepared::Adapted(f, cache) => {
                let k = self.step_of[j];
                if let Some((ck, v)) = cache.get() {
                    if ck == k {
                        return v;
                    }
                }
                let v = f(k, &self.path.prefix(self.at[k]));
                cache.set(Some((k, v)));
                v
            }
            Prepared::Map(inner, f) => f(self.eval(inner, j)),
            Prepared::Zip(a, b, f) => f(self.eval(a, j), self.eval(b, j)),
            Prepared::Truncated(inner, stop) => {
                if j < *stop {
                    self.eval(inner, j)
                } else {
                    T::zero()
                }
            }
        }
    }
}
