//! Uncertainty sets, scenario trees and the dynamic-programming oracle.

pub mod cylinder;
pub mod lattice;
pub mod partition;
pub mod path;
pub mod simulate;
pub mod tree;
pub mod uncertainty;

pub use cylinder::{Coordinates, Cylinder};
pub use lattice::Lattice;
pub use partition::Partition;
pub use path::PathView;
pub use simulate::{
    map_paths, mean_and_se, simulate_path, simulate_paths, ControlRule, PathBundle, PolicyRule,
    SamplePath, SimGrid,
};
pub use tree::{
    capacity, conditional_value, lp_norm, upper_expectation, ControlPolicy, NodeFunction, PathBuf,
    ScenarioTree, SuffixView, TreeConfig, TreeControls, DEFAULT_NODE_BUDGET,
};
pub use uncertainty::{sym_sqrt, Control, ResolvedControl, UncertaintySet};
