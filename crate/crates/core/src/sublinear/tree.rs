//! Finite adapted scenario tree and the dynamic-programming upper expectation.
//!
//! Level `k` of the tree holds one node per path prefix of increments up to
//! `t_k`. Below every node each admissible control spawns `m` equiprobable
//! children (`m = 2` for `d = 1`, `m = 4` for `d = 2`) whose increments have
//! mean zero and covariance exactly `Q dt`. The quadratic-variation
//! accumulator moves by the compensator `Q dt` on every edge.
//!
//! Node `i` of level `k` has children `i * branching(k) + c * m + r` at level
//! `k + 1`, where `c` is the control index and `r` the branch.

use crate::error::{invalid, Error, Result};
use crate::scalar::{Scalar, Vec2};
use crate::sublinear::cylinder::Cylinder;
use crate::sublinear::partition::Partition;
use crate::sublinear::path::{qv_dim, qv_slot, PathView};
use crate::sublinear::uncertainty::{Control, ResolvedControl, UncertaintySet};

/// Default node budget.
pub const DEFAULT_NODE_BUDGET: usize = 2_000_000;

/// Control sets used at each tree level.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum TreeControls<T> {
    /// Interval endpoints (`d = 1`) or the whole covariance set (`d = 2`).
    #[default]
    Default,
    /// Same finite set at every level.
    Uniform(Vec<Control<T>>),
    /// One set per level.
    PerLevel(Vec<Vec<Control<T>>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeConfig<T> {
    pub controls: TreeControls<T>,
    pub node_budget: usize,
}

impl<T> Default for TreeConfig<T> {
    fn default() -> Self {
        Self {
            controls: TreeControls::Default,
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }
}

impl<T: Scalar> TreeConfig<T> {
    /// `points` equally spaced volatilities on `[sigma_lo, sigma_hi]` (`d = 1`).
    pub fn sigma_grid(u: &UncertaintySet<T>, points: usize) -> Result<Self> {
        let (lo, hi) = u
            .interval_bounds()
            .ok_or_else(|| Error::InvalidArgument("sigma grid requires d = 1".into()))?;
        if points < 2 {
            return invalid("sigma grid needs at least two points");
        }
        let n = T::from_usize_lossy(points - 1);
        let mut grid: Vec<Control<T>> = (0..points)
            .map(|i| Control::Sigma(lo + (hi - lo) * T::from_usize_lossy(i) / n))
            .collect();
        grid[points - 1] = Control::Sigma(hi);
        Ok(Self {
            controls: TreeControls::Uniform(grid),
            ..Self::default()
        })
    }
}

#[derive(Debug, Clone)]
struct Level<T> {
    b: Vec<T>,
    qv: Vec<T>,
}

/// Per-level branching data: resolved controls and child offsets.
#[derive(Debug, Clone)]
struct Branching<T> {
    controls: Vec<ResolvedControl<T>>,
    /// `db[c * m + r]`: increment of `B` on branch `r` under control `c`.
    db: Vec<Vec2<T>>,
    /// `dqv[c]`: packed covariation increment under control `c`.
    dqv: Vec<[T; 3]>,
}

/// Values on the nodes of one level: a level-`k` measurable random variable.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFunction<T> {
    pub level: usize,
    pub values: Vec<T>,
}

impl<T: Scalar> NodeFunction<T> {
    pub fn new(level: usize, values: Vec<T>) -> Self {
        Self { level, values }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::new(self.level, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.level != other.level || self.values.len() != other.values.len() {
            return invalid("node functions live on different levels");
        }
        Ok(Self::new(
            self.level,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    /// `max_i |self_i - other_i|`, infinite on level mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        if self.level != other.level || self.values.len() != other.values.len() {
            return T::infinity();
        }
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }
}

/// Adapted control selection: a choice index for every non-leaf node.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPolicy {
    choices: Vec<Vec<usize>>,
}

impl ControlPolicy {
    /// Builds a policy from `rule(level, node)`; validated against the tree.
    pub fn from_fn<T: Scalar>(
        tree: &ScenarioTree<T>,
        mut rule: impl FnMut(usize, usize) -> usize,
    ) -> Result<Self> {
        let choices: Vec<Vec<usize>> = (0..tree.depth())
            .map(|k| (0..tree.level_size(k)).map(|i| rule(k, i)).collect())
            .collect();
        Self::from_table(tree, choices)
    }

    pub fn from_table<T: Scalar>(tree: &ScenarioTree<T>, choices: Vec<Vec<usize>>) -> Result<Self> {
        if choices.len() != tree.depth() {
            return invalid("policy must cover every non-leaf level");
        }
        for (k, row) in choices.iter().enumerate() {
            if row.len() != tree.level_size(k) {
                return invalid(format!("policy level {k} does not cover every node"));
            }
            let n = tree.controls(k).len();
            if let Some(&c) = row.iter().find(|&&c| c >= n) {
                return invalid(format!("policy choice {c} outside level {k} control set"));
            }
        }
        Ok(Self { choices })
    }

    /// Same control index on every node.
    pub fn constant<T: Scalar>(tree: &ScenarioTree<T>, choice: usize) -> Result<Self> {
        Self::from_fn(tree, |_, _| choice)
    }

    pub fn choice(&self, level: usize, node: usize) -> usize {
        self.choices[level][node]
    }
}

/// Owned buffer for materialising tree paths.
#[derive(Debug, Clone)]
pub struct PathBuf<T> {
    times: Vec<T>,
    dim: usize,
    b: Vec<T>,
    qv: Vec<T>,
    nodes: Vec<usize>,
}

impl<T: Scalar> PathBuf<T> {
    pub fn view(&self) -> PathView<'_, T> {
        PathView::new(&self.times, self.dim, &self.b, &self.qv).with_nodes(&self.nodes)
    }
}

/// The finite adapted scenario tree.
#[derive(Debug, Clone)]
pub struct ScenarioTree<T> {
    uncertainty: UncertaintySet<T>,
    partition: Partition<T>,
    branching: Vec<Branching<T>>,
    levels: Vec<Level<T>>,
    children_per_control: usize,
}

impl<T: Scalar> ScenarioTree<T> {
    pub fn build(
        uncertainty: &UncertaintySet<T>,
        partition: &Partition<T>,
        config: &TreeConfig<T>,
    ) -> Result<Self> {
        let n = partition.steps();
        let dim = uncertainty.dim();
        let m = if dim == 1 { 2 } else { 4 };
        let per_level: Vec<Vec<Control<T>>> = match &config.controls {
            TreeControls::Default => vec![uncertainty.default_controls(); n],
            TreeControls::Uniform(c) => vec![c.clone(); n],
            TreeControls::PerLevel(c) => {
                if c.len() != n {
                    return invalid(format!(
                        "per-level control sets: expected {n} levels, got {}",
                        c.len()
                    ));
                }
                c.clone()
            }
        };

        let mut total: usize = 1;
        let mut size: usize = 1;
        for (k, set) in per_level.iter().enumerate() {
            if set.is_empty() {
                return invalid(format!("control set of level {k} is empty"));
            }
            size = size.saturating_mul(set.len() * m);
            total = total.saturating_add(size);
            if total > config.node_budget {
                return Err(Error::Size {
                    what: "scenario tree nodes",
                    required: total,
                    bound: config.node_budget,
                });
            }
        }

        let mut branching = Vec::with_capacity(n);
        for (k, set) in per_level.iter().enumerate() {
            let dt = partition.dt(k);
            let sq = dt.sqrt();
            let controls = set
                .iter()
                .map(|&c| uncertainty.resolve(c))
                .collect::<Result<Vec<_>>>()?;
            let mut db = Vec::with_capacity(controls.len() * m);
            let mut dqv = Vec::with_capacity(controls.len());
            for rc in &controls {
                if dim == 1 {
                    let s = rc.root[0][0] * sq;
                    db.push([s, T::zero()]);
                    db.push([-s, T::zero()]);
                } else {
                    let r = rc.root;
                    for (e1, e2) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                        let (e1, e2) = (T::lit(e1), T::lit(e2));
                        db.push([
                            (r[0][0] * e1 + r[0][1] * e2) * sq,
                            (r[1][0] * e1 + r[1][1] * e2) * sq,
                        ]);
                    }
                }
                dqv.push([rc.cov[0][0] * dt, rc.cov[0][1] * dt, rc.cov[1][1] * dt]);
            }
            branching.push(Branching { controls, db, dqv });
        }

        let q = qv_dim(dim);
        let mut levels = Vec::with_capacity(n + 1);
        levels.push(Level {
            b: vec![T::zero(); dim],
            qv: vec![T::zero(); q],
        });
        for br in &branching {
            let prev = levels.last().expect("root level");
            let parents = prev.b.len() / dim;
            let width = br.controls.len() * m;
            let mut b = Vec::with_capacity(parents * width * dim);
            let mut qv = Vec::with_capacity(parents * width * q);
            for p in 0..parents {
                for c in 0..br.controls.len() {
                    for r in 0..m {
                        let inc = br.db[c * m + r];
                        for comp in 0..dim {
                            b.push(prev.b[p * dim + comp] + inc[comp]);
                        }
                        for slot in 0..q {
                            qv.push(prev.qv[p * q + slot] + br.dqv[c][packed(dim, slot)]);
                        }
                    }
                }
            }
            levels.push(Level { b, qv });
        }

        Ok(Self {
            uncertainty: uncertainty.clone(),
            partition: partition.clone(),
            branching,
            levels,
            children_per_control: m,
        })
    }

    /// Tree over `partition` with the default control sets.
    pub fn with_defaults(
        uncertainty: &UncertaintySet<T>,
        partition: &Partition<T>,
    ) -> Result<Self> {
        Self::build(uncertainty, partition, &TreeConfig::default())
    }

    pub fn uncertainty(&self) -> &UncertaintySet<T> {
        &self.uncertainty
    }

    pub fn partition(&self) -> &Partition<T> {
        &self.partition
    }

    pub fn dim(&self) -> usize {
        self.uncertainty.dim()
    }

    /// Number of steps `N`; leaves sit at level `N`.
    pub fn depth(&self) -> usize {
        self.partition.steps()
    }

    pub fn level_size(&self, k: usize) -> usize {
        self.levels[k].b.len() / self.dim()
    }

    pub fn node_count(&self) -> usize {
        (0..=self.depth()).map(|k| self.level_size(k)).sum()
    }

    pub fn controls(&self, k: usize) -> &[ResolvedControl<T>] {
        &self.branching[k].controls
    }

    pub fn children_per_control(&self) -> usize {
        self.children_per_control
    }

    /// Children of one node per level: `|controls| * m`.
    pub fn branching(&self, k: usize) -> usize {
        self.branching[k].controls.len() * self.children_per_control
    }

    pub fn node_b(&self, k: usize, i: usize, c: usize) -> T {
        self.levels[k].b[i * self.dim() + c]
    }

    pub fn node_qv(&self, k: usize, i: usize, p: usize, q: usize) -> T {
        let dim = self.dim();
        self.levels[k].qv[i * qv_dim(dim) + qv_slot(dim, p, q)]
    }

    /// Control index on the edge entering node `i` of level `k >= 1`.
    pub fn entering_control(&self, k: usize, i: usize) -> usize {
        (i % self.branching(k - 1)) / self.children_per_control
    }

    /// Ancestor at level `l <= k` of node `i` at level `k`.
    pub fn ancestor(&self, k: usize, mut i: usize, l: usize) -> usize {
        debug_assert!(l <= k);
        for lev in (l..k).rev() {
            i /= self.branching(lev);
        }
        i
    }

    /// Children of node `i` (level `k`) under control `c`.
    pub fn children(&self, k: usize, i: usize, c: usize) -> std::ops::Range<usize> {
        let start = i * self.branching(k) + c * self.children_per_control;
        start..start + self.children_per_control
    }

    /// Fills `buf` with the path from the root to node `i` of level `k`.
    pub fn path_into(&self, k: usize, i: usize, buf: &mut PathBuf<T>) {
        let dim = self.dim();
        let q = qv_dim(dim);
        buf.times.clear();
        buf.times.extend_from_slice(&self.partition.times()[..=k]);
        buf.b.resize((k + 1) * dim, T::zero());
        buf.qv.resize((k + 1) * q, T::zero());
        buf.nodes.resize(k + 1, 0);
        let mut node = i;
        for lev in (0..=k).rev() {
            buf.nodes[lev] = node;
            buf.b[lev * dim..(lev + 1) * dim]
                .copy_from_slice(&self.levels[lev].b[node * dim..(node + 1) * dim]);
            buf.qv[lev * q..(lev + 1) * q]
                .copy_from_slice(&self.levels[lev].qv[node * q..(node + 1) * q]);
            if lev > 0 {
                node /= self.branching(lev - 1);
            }
        }
    }

    pub fn path_buf(&self) -> PathBuf<T> {
        PathBuf {
            times: Vec::new(),
            dim: self.dim(),
            b: Vec::new(),
            qv: Vec::new(),
            nodes: Vec::new(),
        }
    }

    /// Evaluates an adapted functional of the path prefix on every node of level `k`.
    pub fn level_values(&self, k: usize, f: impl Fn(&PathView<'_, T>) -> T) -> NodeFunction<T> {
        let mut buf = self.path_buf();
        let values = (0..self.level_size(k))
            .map(|i| {
                self.path_into(k, i, &mut buf);
                f(&buf.view())
            })
            .collect();
        NodeFunction::new(k, values)
    }

    /// Evaluates a path functional on every leaf.
    pub fn leaf_values(&self, f: impl Fn(&PathView<'_, T>) -> T) -> NodeFunction<T> {
        self.level_values(self.depth(), f)
    }

    /// Leaf values of a cylinder functional.
    pub fn cylinder_leaf_values(&self, payoff: &Cylinder<T>) -> Result<NodeFunction<T>> {
        if payoff.dim() != 1 && payoff.dim() != self.dim() {
            return invalid("payoff dimension does not match the tree");
        }
        let levels = payoff.bind(&self.partition)?;
        Ok(self.leaf_values(|p| payoff.eval_on_path(&levels, p)))
    }

    /// One backward-induction step from level `k + 1` to `k`:
    /// `value(node) = max_c mean(children under c)`, ties toward the
    /// preferred control. Returns values and maximising control indices.
    pub fn step_back(&self, next: &NodeFunction<T>) -> Result<(NodeFunction<T>, Vec<usize>)> {
        if next.level == 0 || next.level > self.depth() {
            return invalid("cannot step back from the root");
        }
        if next.values.len() != self.level_size(next.level) {
            return invalid("node function does not match its level");
        }
        let k = next.level - 1;
        let br = &self.branching[k];
        let m = self.children_per_control;
        let inv_m = T::one() / T::from_usize_lossy(m);
        let mut values = Vec::with_capacity(self.level_size(k));
        let mut argmax = Vec::with_capacity(self.level_size(k));
        for i in 0..self.level_size(k) {
            let mut best = T::neg_infinity();
            let mut best_c = 0;
            for c in 0..br.controls.len() {
                let v = self.children(k, i, c).map(|j| next.values[j]).sum::<T>() * inv_m;
                let better = v > best
                    || (v == best
                        && br.controls[c].control.preference()
                            > br.controls[best_c].control.preference());
                if better {
                    best = v;
                    best_c = c;
                }
            }
            values.push(best);
            argmax.push(best_c);
        }
        Ok((NodeFunction::new(k, values), argmax))
    }

    /// Broadcasts a level-`t` function to the finer level `s >= t`.
    pub fn lift(&self, f: &NodeFunction<T>, s: usize) -> Result<NodeFunction<T>> {
        if s < f.level || s > self.depth() {
            return invalid("lift target must be a deeper level");
        }
        let values = (0..self.level_size(s))
            .map(|i| f.values[self.ancestor(s, i, f.level)])
            .collect();
        Ok(NodeFunction::new(s, values))
    }

    /// Conditional upper expectation of a level-`t` variable at level `s`.
    /// For `s >= t` the variable is already measurable and is lifted.
    pub fn conditional(&self, f: &NodeFunction<T>, s: usize) -> Result<NodeFunction<T>> {
        if s > self.depth() {
            return invalid("conditioning level beyond the horizon");
        }
        if s >= f.level {
            return self.lift(f, s);
        }
        let mut cur = f.clone();
        while cur.level > s {
            cur = self.step_back(&cur)?.0;
        }
        Ok(cur)
    }

    /// Upper expectation of a node function (usually leaf values).
    pub fn expect(&self, f: &NodeFunction<T>) -> Result<T> {
        Ok(self.conditional(f, 0)?.values[0])
    }

    /// Linear expectation under one control policy.
    pub fn policy_expectation(&self, policy: &ControlPolicy, f: &NodeFunction<T>) -> Result<T> {
        let m = self.children_per_control;
        let inv_m = T::one() / T::from_usize_lossy(m);
        let mut cur = f.clone();
        while cur.level > 0 {
            let k = cur.level - 1;
            let values = (0..self.level_size(k))
                .map(|i| {
                    self.children(k, i, policy.choice(k, i))
                        .map(|j| cur.values[j])
                        .sum::<T>()
                        * inv_m
                })
                .collect();
            cur = NodeFunction::new(k, values);
        }
        Ok(cur.values[0])
    }

    /// Maximising policy of the backward induction for `f` (leaf values).
    pub fn optimal_policy(&self, f: &NodeFunction<T>) -> Result<ControlPolicy> {
        let mut choices = vec![Vec::new(); f.level];
        let mut cur = f.clone();
        while cur.level > 0 {
            let (prev, arg) = self.step_back(&cur)?;
            choices[prev.level] = arg;
            cur = prev;
        }
        ControlPolicy::from_table(self, choices)
    }

    /// `sup_P E_P[f]` restricted to a subtree: the upper expectation of a
    /// functional of the increments after level `s`, computed on the
    /// subtree below the first level-`s` node. Every level-`s` node carries
    /// an identical subtree, so the value does not depend on the node.
    pub fn suffix_expectation(&self, s: usize, f: &dyn Fn(&SuffixView<'_, T>) -> T) -> Result<T> {
        if s > self.depth() {
            return invalid("suffix level beyond the horizon");
        }
        let mut incs: Vec<Vec2<T>> = Vec::with_capacity(self.depth() - s);
        let mut dqv: Vec<[T; 3]> = Vec::with_capacity(self.depth() - s);
        Ok(self.suffix_rec(s, s, &mut incs, &mut dqv, f))
    }

    fn suffix_rec(
        &self,
        start: usize,
        k: usize,
        incs: &mut Vec<Vec2<T>>,
        dqv: &mut Vec<[T; 3]>,
        f: &dyn Fn(&SuffixView<'_, T>) -> T,
    ) -> T {
        if k == self.depth() {
            return f(&SuffixView {
                start,
                times: self.partition.times(),
                db: incs,
                dqv,
            });
        }
        let br = &self.branching[k];
        let m = self.children_per_control;
        let inv_m = T::one() / T::from_usize_lossy(m);
        let mut best = T::neg_infinity();
        for c in 0..br.controls.len() {
            let mut acc = T::zero();
            for r in 0..m {
                incs.push(br.db[c * m + r]);
                dqv.push(br.dqv[c]);
                acc += self.suffix_rec(start, k + 1, incs, dqv, f);
                incs.pop();
                dqv.pop();
            }
            best = best.max(acc * inv_m);
        }
        best
    }
}

/// Increments of a path after level `start`, handed to suffix functionals.
#[derive(Debug, Clone, Copy)]
pub struct SuffixView<'a, T> {
    start: usize,
    times: &'a [T],
    db: &'a [Vec2<T>],
    dqv: &'a [[T; 3]],
}

impl<'a, T: Scalar> SuffixView<'a, T> {
    /// Level the suffix starts from.
    pub fn start(&self) -> usize {
        self.start
    }

    /// Number of increments.
    pub fn len(&self) -> usize {
        self.db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.db.is_empty()
    }

    /// Increment of `B^c` over global step `k` (`start <= k < N`).
    pub fn db(&self, k: usize, c: usize) -> T {
        self.db[k - self.start][c]
    }

    /// Covariation increment `<B^p, B^q>` over global step `k`.
    pub fn dqv(&self, k: usize, p: usize, q: usize) -> T {
        let slot = if p == q { 2 * p } else { 1 };
        self.dqv[k - self.start][slot]
    }

    /// `B^c_{t_b} - B^c_{t_a}` for `start <= a <= b <= N`.
    pub fn increment(&self, a: usize, b: usize, c: usize) -> T {
        (a..b)
            .map(|k| self.db(k, c))
            .fold(T::zero(), |acc, x| acc + x)
    }

    pub fn dt(&self, k: usize) -> T {
        self.times[k + 1] - self.times[k]
    }
}

/// Maps a packed covariation slot of dimension `dim` to the 3-slot layout.
fn packed(dim: usize, slot: usize) -> usize {
    if dim == 1 {
        0
    } else {
        slot
    }
}

// ---------------------------------------------------------------------------
// Public operations on cylinder payoffs
// ---------------------------------------------------------------------------

/// `sup_{P} E_P[payoff]` over all adapted control policies on the tree.
pub fn upper_expectation<T: Scalar>(tree: &ScenarioTree<T>, payoff: &Cylinder<T>) -> Result<T> {
    tree.expect(&tree.cylinder_leaf_values(payoff)?)
}

/// Level-`s` value function of the backward induction for `payoff`.
pub fn conditional_value<T: Scalar>(
    tree: &ScenarioTree<T>,
    payoff: &Cylinder<T>,
    s: T,
) -> Result<NodeFunction<T>> {
    let level = tree.partition().require_index(s)?;
    tree.conditional(&tree.cylinder_leaf_values(payoff)?, level)
}

/// Choquet capacity `c(A) = sup_P P(A)` of a leaf event.
pub fn capacity<T: Scalar>(tree: &ScenarioTree<T>, event: impl Fn(&PathView<'_, T>) -> bool) -> T {
    let leaf = tree.leaf_values(|p| if event(p) { T::one() } else { T::zero() });
    tree.expect(&leaf).expect("leaf function matches tree")
}

/// `(E[|payoff|^p])^{1/p}` for `p` in `{1, 2, 4, 8}`.
pub fn lp_norm<T: Scalar>(tree: &ScenarioTree<T>, payoff: &Cylinder<T>, p: u32) -> Result<T> {
    if ![1, 2, 4, 8].contains(&p) {
        return invalid(format!("unsupported norm exponent p = {p}"));
    }
    let powered = payoff.map(move |x| x.abs().powi(p as i32));
    let v = upper_expectation(tree, &powered)?;
    Ok(v.powf(T::one() / T::from_usize_lossy(p as usize)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u() -> UncertaintySet<f64> {
        UncertaintySet::interval(0.5, 1.0).unwrap()
    }

    fn tree(n: usize) -> ScenarioTree<f64> {
        ScenarioTree::with_defaults(&u(), &Partition::uniform(1.0, n).unwrap()).unwrap()
    }

    #[test]
    fn one_step_construction() {
        let t = tree(1);
        assert_eq!(t.level_size(1), 4);
        let b: Vec<f64> = (0..4).map(|i| t.node_b(1, i, 0)).collect();
        assert_eq!(b, vec![0.5, -0.5, 1.0, -1.0]);
        let qv: Vec<f64> = (0..4).map(|i| t.node_qv(1, i, 0, 0)).collect();
        assert_eq!(qv, vec![0.25, 0.25, 1.0, 1.0]);
    }

    #[test]
    fn leaf_count_by_enumeration() {
        let t = tree(6);
        assert_eq!(t.level_size(6), 4usize.pow(6));
        assert_eq!(
            t.node_count(),
            (0..=6).map(|k| 4usize.pow(k)).sum::<usize>()
        );
    }

    #[test]
    fn zero_steps_rejected() {
        assert!(Partition::<f64>::uniform(1.0, 0).is_err());
    }

    #[test]
    fn budget_is_an_error() {
        let cfg = TreeConfig {
            node_budget: 100,
            ..TreeConfig::default()
        };
        let err =
            ScenarioTree::build(&u(), &Partition::uniform(1.0, 6).unwrap(), &cfg).unwrap_err();
        assert!(matches!(err, Error::Size { bound: 100, .. }));
    }

    #[test]
    fn children_moments_exact() {
        let t = tree(3);
        for k in 0..3 {
            let dt = t.partition().dt(k);
            for i in 0..t.level_size(k) {
                for c in 0..t.controls(k).len() {
                    let sigma = t.controls(k)[c].root[0][0];
                    let kids: Vec<f64> = t
                        .children(k, i, c)
                        .map(|j| t.node_b(k + 1, j, 0) - t.node_b(k, i, 0))
                        .collect();
                    let mean: f64 = kids.iter().sum::<f64>() / 2.0;
                    let second: f64 = kids.iter().map(|x| x * x).sum::<f64>() / 2.0;
                    assert!(mean.abs() < 1e-15);
                    assert!((second - sigma * sigma * dt).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn square_forced_values() {
        for n in 1..=5 {
            let t = tree(n);
            let sq = Cylinder::of_values(vec![1.0], |x: &[f64]| x[0] * x[0]).unwrap();
            let v = upper_expectation(&t, &sq).unwrap();
            assert!((v - 1.0).abs() < 1e-12, "n={n}: {v}");
            let neg = sq.map(|x| -x);
            let v = upper_expectation(&t, &neg).unwrap();
            assert!((v + 0.25).abs() < 1e-12, "n={n}: {v}");
        }
    }

    #[test]
    fn constant_payoff() {
        let t = tree(3);
        assert_eq!(
            upper_expectation(&t, &Cylinder::constant(2.5)).unwrap(),
            2.5
        );
    }

    #[test]
    fn off_grid_monitoring_time() {
        let t = tree(4);
        let c = Cylinder::of_values(vec![0.3], |x: &[f64]| x[0]).unwrap();
        assert!(matches!(
            upper_expectation(&t, &c),
            Err(Error::InvalidArgument(_))
        ));
        assert!(conditional_value(&t, &Cylinder::constant(1.0), 0.3).is_err());
    }

    #[test]
    fn conditional_examples() {
        let t = tree(4);
        let inc = Cylinder::of_values(vec![0.5, 1.0], |x: &[f64]| x[1] - x[0]).unwrap();
        let v = conditional_value(&t, &inc, 0.5).unwrap();
        assert!(v.values.iter().all(|x| x.abs() < 1e-15));

        let measurable = Cylinder::of_values(vec![0.5], |x: &[f64]| x[0].sin()).unwrap();
        let v = conditional_value(&t, &measurable, 0.5).unwrap();
        let direct = t.level_values(2, |p| p.b1(2).sin());
        assert!(v.max_abs_diff(&direct) == 0.0);

        let sq = Cylinder::of_values(vec![1.0], |x: &[f64]| x[0] * x[0]).unwrap();
        let root = conditional_value(&t, &sq, 0.0).unwrap();
        assert_eq!(root.values[0], upper_expectation(&t, &sq).unwrap());
    }

    #[test]
    fn capacity_examples() {
        let t = tree(4);
        assert_eq!(capacity(&t, |_| true), 1.0);
        assert_eq!(capacity(&t, |_| false), 0.0);
        let dt: f64 = 0.25;
        let edge = 1.0 * dt.sqrt() * 4.0;
        let c = capacity(&t, |p| p.b1(4).abs() >= edge * (1.0 - 1e-12));
        // oracle: only the all-up / all-down paths under sigma_hi reach the edge
        assert!((c - 2.0 * 0.5f64.powi(4)).abs() < 1e-15);
    }

    #[test]
    fn lp_norm_examples() {
        let t = tree(3);
        assert!((lp_norm(&t, &Cylinder::constant(-3.0), 4).unwrap() - 3.0).abs() < 1e-12);
        let b = Cylinder::of_values(vec![1.0], |x: &[f64]| x[0]).unwrap();
        assert!((lp_norm(&t, &b, 2).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(lp_norm(&t, &b, 3), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn optimal_policy_attains_and_dominates() {
        let t = tree(3);
        let leaf = t.leaf_values(|p| (p.b1(1) * 3.0).sin() - p.b1(3) * p.b1(3) * p.b1(2));
        let best = t.expect(&leaf).unwrap();
        let pol = t.optimal_policy(&leaf).unwrap();
        assert!((t.policy_expectation(&pol, &leaf).unwrap() - best).abs() < 1e-12);
        for c in 0..2 {
            let p = ControlPolicy::constant(&t, c).unwrap();
            assert!(t.policy_expectation(&p, &leaf).unwrap() <= best + 1e-12);
        }
    }

    #[test]
    fn ties_prefer_larger_sigma() {
        let t = tree(2);
        let leaf = NodeFunction::new(2, vec![1.0; t.level_size(2)]);
        let pol = t.optimal_policy(&leaf).unwrap();
        for k in 0..2 {
            for i in 0..t.level_size(k) {
                assert_eq!(t.controls(k)[pol.choice(k, i)].control, Control::Sigma(1.0));
            }
        }
    }

    #[test]
    fn suffix_matches_full_tree() {
        let t = tree(4);
        let full = t.expect(&t.leaf_values(|p| {
            let x = p.b1(4) - p.b1(2);
            x * x * x - x.abs()
        }));
        let suffix = t
            .suffix_expectation(2, &|s| {
                let x = s.increment(2, 4, 0);
                x * x * x - x.abs()
            })
            .unwrap();
        assert!((full.unwrap() - suffix).abs() < 1e-12);
    }

    #[test]
    fn two_dim_tree_covariance() {
        let theta = vec![[[1.0, 0.3], [0.3, 0.5]], [[0.4, -0.1], [-0.1, 0.9]]];
        let u2 = UncertaintySet::covariances(theta.clone()).unwrap();
        let t = ScenarioTree::with_defaults(&u2, &Partition::uniform(1.0, 2).unwrap()).unwrap();
        assert_eq!(t.branching(0), 8);
        let dt = 0.5;
        for c in 0..2 {
            let kids: Vec<[f64; 2]> = t
                .children(0, 0, c)
                .map(|j| [t.node_b(1, j, 0), t.node_b(1, j, 1)])
                .collect();
            for p in 0..2 {
                let mean: f64 = kids.iter().map(|k| k[p]).sum::<f64>() / 4.0;
                assert!(mean.abs() < 1e-15);
                for q in 0..2 {
                    let cov: f64 = kids.iter().map(|k| k[p] * k[q]).sum::<f64>() / 4.0;
                    assert!((cov - theta[c][p][q] * dt).abs() < 1e-14);
                    assert!(
                        (t.node_qv(1, t.children(0, 0, c).start, p, q) - theta[c][p][q] * dt).abs()
                            < 1e-15
                    );
                }
            }
        }
    }

    #[test]
    fn directional_square_is_twice_g() {
        let theta: Vec<[[f64; 2]; 2]> = vec![[[1.0, 0.5], [0.5, 1.0]], [[0.5, 0.0], [0.0, 0.5]]];
        let u2 = UncertaintySet::covariances(theta).unwrap();
        let t = ScenarioTree::with_defaults(&u2, &Partition::uniform(1.0, 3).unwrap()).unwrap();
        let a = [1.0, 1.0];
        let leaf = t.leaf_values(|p| {
            let x = a[0] * p.b(3, 0) + a[1] * p.b(3, 1);
            x * x
        });
        let aat = [[1.0, 1.0], [1.0, 1.0]];
        let target = 2.0 * u2.g_matrix(&aat).unwrap();
        assert!((t.expect(&leaf).unwrap() - target).abs() < 1e-12);
    }
}
