//! Conditional upper expectation built from simple random variables.
//!
//! A simple random variable at level `s` is `sum_j 1_{A_j} eta_j`, where the
//! blocks `A_j` partition the level-`s` nodes and every `eta_j` depends only
//! on increments after `s`. Its conditional expectation is blockwise the
//! unconditional upper expectation of `eta_j`.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::sublinear::path::PathView;
use crate::sublinear::tree::{NodeFunction, ScenarioTree};

/// Adapted functional of a path prefix.
pub type PathFn<T> = Arc<dyn Fn(&PathView<'_, T>) -> T + Send + Sync>;

/// Bound enforced on multipliers in the scaling identity.
pub const DEFAULT_MULTIPLIER_BOUND: f64 = 1e6;

/// Wraps a closure as a [`PathFn`].
pub fn path_fn<T, F>(f: F) -> PathFn<T>
where
    T: Scalar,
    F: Fn(&PathView<'_, T>) -> T + Send + Sync + 'static,
{
    Arc::new(f)
}

fn validate_blocks<T: Scalar>(
    tree: &ScenarioTree<T>,
    level: usize,
    blocks: &[Vec<usize>],
) -> Result<Vec<usize>> {
    let n = tree.level_size(level);
    let mut owner = vec![usize::MAX; n];
    for (j, block) in blocks.iter().enumerate() {
        for &node in block {
            if node >= n {
                return invalid(format!("block {j} names node {node} outside level {level}"));
            }
            if owner[node] != usize::MAX {
                return invalid(format!(
                    "node {node} lies in blocks {} and {j}",
                    owner[node]
                ));
            }
            owner[node] = j;
        }
    }
    if let Some(node) = owner.iter().position(|&o| o == usize::MAX) {
        return invalid(format!("blocks do not cover node {node} of level {level}"));
    }
    Ok(owner)
}

/// Values of `f` on level `at`, with a check that they depend only on the
/// increments after level `from`: nodes sharing the same branch choices
/// after `from` must agree.
fn independent_values<T: Scalar>(
    tree: &ScenarioTree<T>,
    f: &PathFn<T>,
    from: usize,
    at: usize,
) -> Result<NodeFunction<T>> {
    let values = tree.level_values(at, |p| f(p));
    let width: usize = (from..at).map(|k| tree.branching(k)).product();
    let tol = T::lit(1e-9);
    for (i, &v) in values.values.iter().enumerate() {
        let reference = values.values[i % width];
        if (v - reference).abs() > tol * (T::one() + reference.abs()) {
            return Err(Error::InvalidArgument(format!(
                "factor depends on increments before level {from} (node {i} of level {at})"
            )));
        }
    }
    Ok(values)
}

/// `sum_j 1_{A_j} eta_j` with `A_j` a partition of level-`s` nodes.
#[derive(Clone)]
pub struct SimpleRandomVariable<T> {
    level: usize,
    horizon: usize,
    owner: Vec<usize>,
    payoffs: Vec<PathFn<T>>,
    values: Vec<NodeFunction<T>>,
}

impl<T: fmt::Debug> fmt::Debug for SimpleRandomVariable<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SimpleRandomVariable")
            .field("level", &self.level)
            .field("horizon", &self.horizon)
            .field("blocks", &self.payoffs.len())
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> SimpleRandomVariable<T> {
    /// Validates the partition and the independence of every factor; the
    /// factors are read at level `horizon >= level`.
    pub fn new(
        tree: &ScenarioTree<T>,
        level: usize,
        horizon: usize,
        blocks: Vec<Vec<usize>>,
        payoffs: Vec<PathFn<T>>,
    ) -> Result<Self> {
        if level > horizon || horizon > tree.depth() {
            return invalid("levels must satisfy s <= t <= N");
        }
        if blocks.len() != payoffs.len() {
            return invalid("one payoff per block is required");
        }
        let owner = validate_blocks(tree, level, &blocks)?;
        let values = payoffs
            .iter()
            .map(|f| independent_values(tree, f, level, horizon))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            level,
            horizon,
            owner,
            payoffs,
            values,
        })
    }

    /// One block covering every level-`s` node.
    pub fn single(tree: &ScenarioTree<T>, level: usize, payoff: PathFn<T>) -> Result<Self> {
        let all = (0..tree.level_size(level)).collect();
        Self::new(tree, level, tree.depth(), vec![all], vec![payoff])
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn blocks(&self) -> usize {
        self.payoffs.len()
    }

    pub fn block_of(&self, node: usize) -> usize {
        self.owner[node]
    }

    pub fn payoff(&self, j: usize) -> &PathFn<T> {
        &self.payoffs[j]
    }

    /// The variable as a function on level `horizon`.
    pub fn node_values(&self, tree: &ScenarioTree<T>) -> NodeFunction<T> {
        let values = (0..tree.level_size(self.horizon))
            .map(|i| {
                let a = tree.ancestor(self.horizon, i, self.level);
                self.values[self.owner[a]].values[i]
            })
            .collect();
        NodeFunction::new(self.horizon, values)
    }
}

/// `E_s[eta] = sum_j 1_{A_j} E[eta_j]`.
pub fn cond_expect_simple<T: Scalar>(
    srv: &SimpleRandomVariable<T>,
    tree: &ScenarioTree<T>,
) -> Result<NodeFunction<T>> {
    if srv.horizon > tree.depth() || srv.owner.len() != tree.level_size(srv.level) {
        return invalid("simple random variable does not belong to this tree");
    }
    let block_values = srv
        .values
        .iter()
        .map(|v| tree.expect(v))
        .collect::<Result<Vec<T>>>()?;
    Ok(NodeFunction::new(
        srv.level,
        srv.owner.iter().map(|&j| block_values[j]).collect(),
    ))
}

/// `sum_j 1_{A_j} eta_{s,r}^j eta_{r,t}^j` on levels `s < r < t`.
#[derive(Clone)]
pub struct TripleSimpleRandomVariable<T> {
    levels: (usize, usize, usize),
    owner: Vec<usize>,
    first: Vec<NodeFunction<T>>,
    second: Vec<NodeFunction<T>>,
}

impl<T: fmt::Debug> fmt::Debug for TripleSimpleRandomVariable<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TripleSimpleRandomVariable")
            .field("levels", &self.levels)
            .field("blocks", &self.first.len())
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> TripleSimpleRandomVariable<T> {
    /// `first[j]` is read at level `r` and may depend only on increments in
    /// `[s, r]`; `second[j]` is read at level `t` and may depend only on
    /// increments in `[r, t]`.
    pub fn new(
        tree: &ScenarioTree<T>,
        levels: (usize, usize, usize),
        blocks: Vec<Vec<usize>>,
        first: Vec<PathFn<T>>,
        second: Vec<PathFn<T>>,
    ) -> Result<Self> {
        let (s, r, t) = levels;
        if !(s < r && r < t && t <= tree.depth()) {
            return invalid("levels must satisfy s < r < t <= N");
        }
        if blocks.len() != first.len() || blocks.len() != second.len() {
            return invalid("one factor pair per block is required");
        }
        let owner = validate_blocks(tree, s, &blocks)?;
        let first = first
            .iter()
            .map(|f| independent_values(tree, f, s, r))
            .collect::<Result<Vec<_>>>()?;
        let second = second
            .iter()
            .map(|f| independent_values(tree, f, r, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            levels,
            owner,
            first,
            second,
        })
    }

    pub fn levels(&self) -> (usize, usize, usize) {
        self.levels
    }

    /// The variable on level `t`.
    pub fn node_values(&self, tree: &ScenarioTree<T>) -> NodeFunction<T> {
        let (s, r, t) = self.levels;
        let values = (0..tree.level_size(t))
            .map(|i| {
                let ar = tree.ancestor(t, i, r);
                let j = self.owner[tree.ancestor(r, ar, s)];
                self.first[j].values[ar] * self.second[j].values[i]
            })
            .collect();
        NodeFunction::new(t, values)
    }
}

/// Blockwise closed form and iterated conditioning `E_s[E_r[eta]]`.
///
/// The closed form is
/// `sum_j 1_{A_j} E[(eta_sr^j)^+ E[eta_rt^j] + (eta_sr^j)^- E[-eta_rt^j]]`,
/// which is `E[eta_sr^j] E[eta_rt^j]` for nonnegative factors.
pub fn cond_expect_triple_both_ways<T: Scalar>(
    trv: &TripleSimpleRandomVariable<T>,
    tree: &ScenarioTree<T>,
) -> Result<(NodeFunction<T>, NodeFunction<T>)> {
    let (s, r, t) = trv.levels;
    if t > tree.depth() || trv.owner.len() != tree.level_size(s) {
        return invalid("triple simple random variable does not belong to this tree");
    }
    let mut per_block = Vec::with_capacity(trv.first.len());
    for (f, g) in trv.first.iter().zip(&trv.second) {
        let up = tree.expect(g)?;
        let down = tree.expect(&g.map(|x| -x))?;
        let mixed = f.map(|x| x.pos_part() * up + x.neg_part() * down);
        per_block.push(tree.expect(&mixed)?);
    }
    let direct = NodeFunction::new(s, trv.owner.iter().map(|&j| per_block[j]).collect());
    let inner = tree.conditional(&trv.node_values(tree), r)?;
    let iterated = tree.conditional(&inner, s)?;
    Ok((direct, iterated))
}

/// Largest node-wise gap in `E_s[eta X] = eta^+ E_s[X] + eta^- E_s[-X]`
/// for a bounded level-`s` multiplier `eta`.
pub fn scaling_identity_gap<T: Scalar>(
    tree: &ScenarioTree<T>,
    eta: &NodeFunction<T>,
    x: &NodeFunction<T>,
    bound: T,
) -> Result<T> {
    if let Some(v) = eta.values.iter().find(|v| v.abs() > bound) {
        return invalid(format!("multiplier {v} exceeds the bound {bound}"));
    }
    let lifted = tree.lift(eta, x.level)?;
    let lhs = tree.conditional(&lifted.zip_with(x, |a, b| a * b)?, eta.level)?;
    let plus = tree.conditional(x, eta.level)?;
    let minus = tree.conditional(&x.map(|v| -v), eta.level)?;
    let rhs = eta
        .zip_with(&plus, |e, p| e.pos_part() * p)?
        .zip_with(&eta.zip_with(&minus, |e, m| e.neg_part() * m)?, |a, b| {
            a + b
        })?;
    Ok(lhs.max_abs_diff(&rhs))
}

/// How level-`s` nodes are grouped into blocks for [`approximate_by_simple`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantization {
    /// Equal-count blocks ordered by `B_s`; the block median represents it.
    EqualMassByLevel,
    /// Equal-count blocks in node order; the first node represents it.
    Lexicographic,
}

/// One member of the approximating sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproximationStep<T> {
    pub index: u32,
    pub blocks: usize,
    /// `E[|X - eta^i|]`.
    pub l1_error: T,
    /// `E_s[eta^i]`.
    pub conditional: NodeFunction<T>,
    /// Representative node per block.
    pub representatives: Vec<usize>,
    /// Block of every level-`s` node.
    pub owner: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Approximation<T> {
    pub steps: Vec<ApproximationStep<T>>,
    pub converged: bool,
    pub tolerance: T,
}

impl<T: Scalar> Approximation<T> {
    /// The last member, or a convergence error when `tol` was not reached.
    pub fn limit(&self) -> Result<&ApproximationStep<T>> {
        let last = self.steps.last().expect("non-empty sequence");
        if self.converged {
            Ok(last)
        } else {
            Err(Error::Convergence(format!(
                "L1 error {} above tolerance {} after {} refinements",
                last.l1_error,
                self.tolerance,
                self.steps.len()
            )))
        }
    }

    /// Whether the `L1` error column is nonincreasing.
    pub fn monotone(&self) -> bool {
        self.steps
            .windows(2)
            .all(|w| w[1].l1_error <= w[0].l1_error + T::lit(1e-12))
    }
}

fn quantize<T: Scalar>(
    tree: &ScenarioTree<T>,
    s: usize,
    blocks: usize,
    scheme: Quantization,
) -> (Vec<usize>, Vec<usize>) {
    let n = tree.level_size(s);
    let mut order: Vec<usize> = (0..n).collect();
    if scheme == Quantization::EqualMassByLevel {
        order.sort_by(|&a, &b| {
            tree.node_b(s, a, 0)
                .partial_cmp(&tree.node_b(s, b, 0))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
    }
    let blocks = blocks.min(n);
    let mut owner = vec![0; n];
    let mut reps = Vec::with_capacity(blocks);
    for j in 0..blocks {
        let lo = j * n / blocks;
        let hi = (j + 1) * n / blocks;
        for &node in &order[lo..hi] {
            owner[node] = j;
        }
        reps.push(match scheme {
            Quantization::EqualMassByLevel => order[lo + (hi - lo - 1) / 2],
            Quantization::Lexicographic => order[lo],
        });
    }
    (owner, reps)
}

/// Approximates `X` (given on the leaves) by simple random variables at
/// level `s` with `2^i` blocks, `i = 0, 1, ...`, freezing the prefix of each
/// block at its representative, until `E[|X - eta^i|] <= tol` or `i_max`.
pub fn approximate_by_simple<T: Scalar>(
    tree: &ScenarioTree<T>,
    x: &NodeFunction<T>,
    s: usize,
    tol: T,
    i_max: u32,
    scheme: Quantization,
) -> Result<Approximation<T>> {
    let t = x.level;
    if s > t || x.values.len() != tree.level_size(t) {
        return invalid("payoff must live on a level at or after s");
    }
    if !(tol >= T::zero()) {
        return invalid("tolerance must be non-negative");
    }
    let width: usize = (s..t).map(|k| tree.branching(k)).product();
    let mut steps = Vec::new();
    let mut converged = false;
    for i in 0..=i_max {
        let blocks = 1usize << i.min(40);
        let (owner, reps) = quantize(tree, s, blocks, scheme);
        let frozen: Vec<T> = (0..x.values.len())
            .map(|leaf| {
                let a = leaf / width;
                x.values[reps[owner[a]] * width + leaf % width]
            })
            .collect();
        let frozen = NodeFunction::new(t, frozen);
        let diff = x.zip_with(&frozen, |a, b| (a - b).abs())?;
        let l1_error = tree.expect(&diff)?;
        let per_block = reps
            .iter()
            .map(|&rep| {
                let suffix = NodeFunction::new(
                    t,
                    (0..x.values.len())
                        .map(|leaf| x.values[rep * width + leaf % width])
                        .collect(),
                );
                tree.expect(&suffix)
            })
            .collect::<Result<Vec<T>>>()?;
        let conditional = NodeFunction::new(s, owner.iter().map(|&j| per_block[j]).collect());
        let exhausted = reps.len() >= tree.level_size(s);
        steps.push(ApproximationStep {
            index: i,
            blocks: reps.len(),
            l1_error,
            conditional,
            representatives: reps,
            owner,
        });
        if l1_error <= tol {
            converged = true;
            break;
        }
        if exhausted {
            break;
        }
    }
    Ok(Approximation {
        steps,
        converged,
        tolerance: tol,
    })
}
