//! Borrowed view of one path (or path prefix) of `(B, <B>)`.

use crate::scalar::Scalar;

/// Number of stored quadratic-covariation components for dimension `d`.
pub(crate) fn qv_dim(dim: usize) -> usize {
    if dim == 1 {
        1
    } else {
        3
    }
}

/// Slot of `<B^i, B^j>` in the packed covariation array.
#[inline]
pub(crate) fn qv_slot(dim: usize, i: usize, j: usize) -> usize {
    if dim == 1 {
        0
    } else {
        i + j
    }
}

/// A path of `B` and `<B>` on grid points `0..len()`.
///
/// Views handed to adapted callbacks are prefixes ending at the current
/// time, so a callback cannot look ahead.
#[derive(Debug, Clone, Copy)]
pub struct PathView<'a, T> {
    pub(crate) times: &'a [T],
    pub(crate) dim: usize,
    pub(crate) b: &'a [T],
    pub(crate) qv: &'a [T],
    pub(crate) nodes: &'a [usize],
}

impl<'a, T: Scalar> PathView<'a, T> {
    pub fn new(times: &'a [T], dim: usize, b: &'a [T], qv: &'a [T]) -> Self {
        debug_assert_eq!(b.len(), times.len() * dim);
        debug_assert_eq!(qv.len(), times.len() * qv_dim(dim));
        Self {
            times,
            dim,
            b,
            qv,
            nodes: &[],
        }
    }

    pub(crate) fn with_nodes(mut self, nodes: &'a [usize]) -> Self {
        self.nodes = nodes;
        self
    }

    /// Number of grid points in the view.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the last grid point.
    pub fn last(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn time(&self, i: usize) -> T {
        self.times[i]
    }

    pub fn now(&self) -> T {
        self.times[self.last()]
    }

    /// `B^c` at grid point `i`.
    pub fn b(&self, i: usize, c: usize) -> T {
        self.b[i * self.dim + c]
    }

    /// First component of `B` at grid point `i`.
    pub fn b1(&self, i: usize) -> T {
        self.b[i * self.dim]
    }

    /// `<B^p, B^q>` at grid point `i`.
    pub fn qv(&self, i: usize, p: usize, q: usize) -> T {
        self.qv[i * qv_dim(self.dim) + qv_slot(self.dim, p, q)]
    }

    /// `<B>` (first component) at grid point `i`.
    pub fn qv1(&self, i: usize) -> T {
        self.qv[i * qv_dim(self.dim)]
    }

    /// Increment `B^c_{k+1} - B^c_k`.
    pub fn db(&self, k: usize, c: usize) -> T {
        self.b(k + 1, c) - self.b(k, c)
    }

    /// Increment of `<B^p, B^q>` over step `k`.
    pub fn dqv(&self, k: usize, p: usize, q: usize) -> T {
        self.qv(k + 1, p, q) - self.qv(k, p, q)
    }

    /// Tree node index at grid point `i`, when the view comes from a tree.
    pub fn node(&self, i: usize) -> Option<usize> {
        self.nodes.get(i).copied()
    }

    /// View restricted to grid points `0..=k`.
    pub fn prefix(&self, k: usize) -> PathView<'a, T> {
        let q = qv_dim(self.dim);
        PathView {
            times: &self.times[..=k],
            dim: self.dim,
            b: &self.b[..(k + 1) * self.dim],
            qv: &self.qv[..(k + 1) * q],
            nodes: if self.nodes.is_empty() {
                self.nodes
            } else {
                &self.nodes[..=k]
            },
        }
    }
}
