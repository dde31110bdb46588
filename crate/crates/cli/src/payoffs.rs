//! Registry of one-dimensional cylinder payoffs.

use std::collections::BTreeMap;
use std::sync::Arc;

use gstoch_core::gheat::TerminalCondition;
use gstoch_core::sublinear::Cylinder;
use serde::{Deserialize, Serialize};

/// A payoff by name, optionally with parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PayoffRef {
    Name(String),
    Full {
        name: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
}

impl PayoffRef {
    pub fn named(name: &str) -> Self {
        Self::Name(name.to_string())
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Name(n) | Self::Full { name: n, .. } => n,
        }
    }

    fn param(&self, key: &str, default: f64) -> f64 {
        match self {
            Self::Name(_) => default,
            Self::Full { params, .. } => params.get(key).copied().unwrap_or(default),
        }
    }

    fn params(&self) -> Vec<&str> {
        match self {
            Self::Name(_) => Vec::new(),
            Self::Full { params, .. } => params.keys().map(String::as_str).collect(),
        }
    }
}

/// Shape of the payoff in the monitored values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Convex,
    Concave,
    Mixed,
}

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

type Builder = fn(&dyn Fn(&str) -> f64) -> ValueFn;

struct Entry {
    name: &'static str,
    shape: Shape,
    two_time: bool,
    params: &'static [(&'static str, f64)],
    build: Builder,
}

const REGISTRY: &[Entry] = &[
    Entry {
        name: "square",
        shape: Shape::Convex,
        two_time: false,
        params: &[("scale", 1.0)],
        build: |p| {
            let s = p("scale");
            Arc::new(move |x| s * x[0] * x[0])
        },
    },
    Entry {
        name: "neg_square",
        shape: Shape::Concave,
        two_time: false,
        params: &[("scale", 1.0)],
        build: |p| {
            let s = p("scale");
            Arc::new(move |x| -s * x[0] * x[0])
        },
    },
    Entry {
        name: "abs",
        shape: Shape::Convex,
        two_time: false,
        params: &[],
        build: |_| Arc::new(|x| x[0].abs()),
    },
    Entry {
        name: "constant",
        shape: Shape::Mixed,
        two_time: false,
        params: &[("value", 1.5)],
        build: |p| {
            let c = p("value");
            Arc::new(move |_| c)
        },
    },
    Entry {
        name: "linear",
        shape: Shape::Mixed,
        two_time: false,
        params: &[],
        build: |_| Arc::new(|x| x[0]),
    },
    Entry {
        name: "call",
        shape: Shape::Convex,
        two_time: false,
        params: &[("strike", 0.2)],
        build: |p| {
            let k = p("strike");
            Arc::new(move |x| (x[0] - k).max(0.0))
        },
    },
    Entry {
        name: "cubic",
        shape: Shape::Mixed,
        two_time: false,
        params: &[],
        build: |_| Arc::new(|x| x[0] * x[0] * x[0]),
    },
    Entry {
        name: "sine",
        shape: Shape::Mixed,
        two_time: false,
        params: &[("frequency", 2.0)],
        build: |p| {
            let w = p("frequency");
            Arc::new(move |x| (w * x[0]).sin())
        },
    },
    Entry {
        name: "double_well",
        shape: Shape::Mixed,
        two_time: false,
        params: &[],
        build: |_| Arc::new(|x| x[0].powi(4) - 2.0 * x[0] * x[0]),
    },
    Entry {
        name: "two_time_square_sum",
        shape: Shape::Convex,
        two_time: true,
        params: &[],
        build: |_| Arc::new(|x| x[0] * x[0] + x[1] * x[1]),
    },
    Entry {
        name: "two_time_product",
        shape: Shape::Mixed,
        two_time: true,
        params: &[],
        build: |_| Arc::new(|x| x[0] * x[1]),
    },
    Entry {
        name: "two_time_max",
        shape: Shape::Convex,
        two_time: true,
        params: &[],
        build: |_| Arc::new(|x| x[0].max(x[1])),
    },
    Entry {
        name: "two_time_mixed",
        shape: Shape::Mixed,
        two_time: true,
        params: &[],
        build: |_| Arc::new(|x| x[0].sin() * x[1] * x[1] - x[1].abs()),
    },
];

/// Payoffs compared across oracles by default.
pub const COMPARE_PANEL: [&str; 12] = [
    "square",
    "neg_square",
    "abs",
    "constant",
    "call",
    "cubic",
    "sine",
    "double_well",
    "two_time_square_sum",
    "two_time_product",
    "two_time_max",
    "two_time_mixed",
];

pub fn names() -> impl Iterator<Item = &'static str> {
    REGISTRY.iter().map(|e| e.name)
}

/// `f(B_{t_1}, ..., B_{t_n})` with `t_n = T` and, for two-time payoffs,
/// `t_1 = T / 2`.
#[derive(Clone)]
pub struct Payoff {
    pub name: String,
    pub shape: Shape,
    pub times: Vec<f64>,
    f: ValueFn,
}

impl std::fmt::Debug for Payoff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Payoff")
            .field("name", &self.name)
            .field("shape", &self.shape)
            .field("times", &self.times)
            .finish_non_exhaustive()
    }
}

impl Payoff {
    pub fn resolve(spec: &PayoffRef, horizon: f64) -> Result<Self, String> {
        let entry = REGISTRY
            .iter()
            .find(|e| e.name == spec.name())
            .ok_or_else(|| format!("unknown payoff '{}'", spec.name()))?;
        for key in spec.params() {
            if !entry.params.iter().any(|(k, _)| *k == key) {
                return Err(format!("payoff '{}' has no parameter '{key}'", entry.name));
            }
        }
        let mut values = Vec::new();
        for &(k, d) in entry.params {
            let v = spec.param(k, d);
            if !v.is_finite() {
                return Err(format!("payoff parameter '{k}' must be finite"));
            }
            values.push((k, v));
        }
        let lookup = |k: &str| {
            values
                .iter()
                .find(|(n, _)| *n == k)
                .map(|&(_, v)| v)
                .expect("declared parameter")
        };
        let times = if entry.two_time {
            vec![0.5 * horizon, horizon]
        } else {
            vec![horizon]
        };
        Ok(Self {
            name: entry.name.to_string(),
            shape: entry.shape,
            times,
            f: (entry.build)(&lookup),
        })
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        (self.f)(values)
    }

    pub fn cylinder(&self) -> Cylinder<f64> {
        let f = self.f.clone();
        Cylinder::of_values(self.times.clone(), move |x| f(x)).expect("increasing positive times")
    }

    pub fn terminal(&self) -> TerminalCondition<f64> {
        TerminalCondition::from_cylinder(&self.cylinder()).expect("one-dimensional payoff")
    }
}
