//! Prefix-decidable stopping times.
//!
//! A stopping time is realised on a path as the first grid index at which
//! its rule has fired, or the horizon when it never fires. Every rule
//! decides `{tau <= t_j}` from the prefix up to `t_j`.

use std::fmt;
use std::sync::Arc;

use crate::scalar::Scalar;
use crate::sublinear::partition::Partition;
use crate::sublinear::path::PathView;

type PrefixPredicate<T> = Arc<dyn Fn(&PathView<'_, T>) -> bool + Send + Sync>;
type ScanFn<T> = Arc<dyn Fn(&PathView<'_, T>) -> Option<usize> + Send + Sync>;

/// Relative tolerance for comparing times.
const TIME_TOL: f64 = 1e-12;

#[derive(Clone)]
pub enum StopRule<T> {
    /// Never fires: `tau = T`.
    Horizon,
    /// Deterministic time.
    At(T),
    /// First time `|B^c| >= level`.
    FirstExit { component: usize, level: T },
    /// First time `B^c >= level`.
    FirstAbove { component: usize, level: T },
    /// First time `<B^c> >= level`.
    QvAbove { component: usize, level: T },
    /// First time the predicate holds at the end of the prefix.
    Predicate(PrefixPredicate<T>),
    /// First index reported by a forward scan of the path. The scan must
    /// return the same index on every prefix that contains it and `None`
    /// on shorter prefixes.
    Scan(ScanFn<T>),
    /// Minimum of two stopping times.
    Either(Box<StopRule<T>>, Box<StopRule<T>>),
    /// Maximum of two stopping times.
    Both(Box<StopRule<T>>, Box<StopRule<T>>),
    /// The inner time rounded up to the next point of `grid`.
    Rounded {
        inner: Box<StoppingTime<T>>,
        grid: Partition<T>,
    },
}

impl<T: fmt::Debug> fmt::Debug for StopRule<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Horizon => f.write_str("Horizon"),
            Self::At(t) => f.debug_tuple("At").field(t).finish(),
            Self::FirstExit { component, level } => f
                .debug_struct("FirstExit")
                .field("component", component)
                .field("level", level)
                .finish(),
            Self::FirstAbove { component, level } => f
                .debug_struct("FirstAbove")
                .field("component", component)
                .field("level", level)
                .finish(),
            Self::QvAbove { component, level } => f
                .debug_struct("QvAbove")
                .field("component", component)
                .field("level", level)
                .finish(),
            Self::Predicate(_) => f.write_str("Predicate(..)"),
            Self::Scan(_) => f.write_str("Scan(..)"),
            Self::Either(a, b) => f.debug_tuple("Either").field(a).field(b).finish(),
            Self::Both(a, b) => f.debug_tuple("Both").field(a).field(b).finish(),
            Self::Rounded { inner, grid } => f
                .debug_struct("Rounded")
                .field("inner", inner)
                .field("grid", grid)
                .finish(),
        }
    }
}

/// A stopping time with an optional deterministic cap.
#[derive(Clone)]
pub struct StoppingTime<T> {
    rule: StopRule<T>,
    cap: Option<T>,
}

impl<T: fmt::Debug> fmt::Debug for StoppingTime<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StoppingTime")
            .field("rule", &self.rule)
            .field("cap", &self.cap)
            .finish()
    }
}

fn time_le<T: Scalar>(a: T, b: T) -> bool {
    a <= b + T::lit(TIME_TOL) * (T::one() + b.abs())
}

impl<T: Scalar> StoppingTime<T> {
    pub fn new(rule: StopRule<T>) -> Self {
        Self { rule, cap: None }
    }

    pub fn horizon() -> Self {
        Self::new(StopRule::Horizon)
    }

    pub fn at(t: T) -> Self {
        Self::new(StopRule::At(t))
    }

    pub fn first_exit(level: T) -> Self {
        Self::new(StopRule::FirstExit {
            component: 0,
            level,
        })
    }

    pub fn predicate(f: impl Fn(&PathView<'_, T>) -> bool + Send + Sync + 'static) -> Self {
        Self::new(StopRule::Predicate(Arc::new(f)))
    }

    pub fn scan(f: impl Fn(&PathView<'_, T>) -> Option<usize> + Send + Sync + 'static) -> Self {
        Self::new(StopRule::Scan(Arc::new(f)))
    }

    pub fn with_cap(mut self, cap: T) -> Self {
        self.cap = Some(cap);
        self
    }

    pub fn either(self, other: Self) -> Self {
        Self::new(StopRule::Either(
            Box::new(self.into_rule()),
            Box::new(other.into_rule()),
        ))
    }

    pub fn both(self, other: Self) -> Self {
        Self::new(StopRule::Both(
            Box::new(self.into_rule()),
            Box::new(other.into_rule()),
        ))
    }

    fn into_rule(self) -> StopRule<T> {
        match self.cap {
            None => self.rule,
            Some(c) => StopRule::Either(Box::new(self.rule), Box::new(StopRule::At(c))),
        }
    }

    pub fn rule(&self) -> &StopRule<T> {
        &self.rule
    }

    pub fn cap(&self) -> Option<T> {
        self.cap
    }

    /// First grid index `j` of `path` with `tau <= t_j`, if any.
    pub fn first_index(&self, path: &PathView<'_, T>) -> Option<usize> {
        let main = first_index(&self.rule, path);
        let capped = self.cap.and_then(|c| first_time_index(path, c));
        match (main, capped) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// `tau` on `path`: the time of [`StoppingTime::first_index`], else the
    /// horizon of the path.
    pub fn realize(&self, path: &PathView<'_, T>) -> T {
        self.first_index(path)
            .map_or_else(|| path.now(), |j| path.time(j))
    }

    /// Whether `{tau <= t}` holds for `t` the end of `prefix`.
    pub fn stopped_by(&self, prefix: &PathView<'_, T>) -> bool {
        self.first_index(prefix).is_some()
    }
}

fn first_time_index<T: Scalar>(path: &PathView<'_, T>, t: T) -> Option<usize> {
    (0..path.len()).find(|&j| time_le(t, path.time(j)))
}

fn first_index<T: Scalar>(rule: &StopRule<T>, path: &PathView<'_, T>) -> Option<usize> {
    match rule {
        StopRule::Horizon => None,
        StopRule::At(t) => first_time_index(path, *t),
        StopRule::FirstExit { component, level } => {
            (0..path.len()).find(|&j| path.b(j, *component).abs() >= *level)
        }
        StopRule::FirstAbove { component, level } => {
            (0..path.len()).find(|&j| path.b(j, *component) >= *level)
        }
        StopRule::QvAbove { component, level } => {
            (0..path.len()).find(|&j| path.qv(j, *component, *component) >= *level)
        }
        StopRule::Predicate(f) => (0..path.len()).find(|&j| f(&path.prefix(j))),
        StopRule::Scan(f) => f(path),
        StopRule::Either(a, b) => match (first_index(a, path), first_index(b, path)) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        },
        StopRule::Both(a, b) => match (first_index(a, path), first_index(b, path)) {
            (Some(x), Some(y)) => Some(x.max(y)),
            _ => None,
        },
        StopRule::Rounded { inner, grid } => {
            let j = inner.first_index(path)?;
            let target = grid.round_up(path.time(j));
            first_time_index(path, target)
        }
    }
}

/// `tau_n`: `tau` rounded up to the next point of `grid`, `T` beyond it.
pub fn grid_stopping_time<T: Scalar>(
    tau: &StoppingTime<T>,
    grid: &Partition<T>,
) -> StoppingTime<T> {
    StoppingTime::new(StopRule::Rounded {
        inner: Box::new(tau.clone()),
        grid: grid.clone(),
    })
}
