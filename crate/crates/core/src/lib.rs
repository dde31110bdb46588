//! Numerical stochastic calculus under `G`-expectation: scenario trees and
//! lattices for the upper expectation, an explicit `G`-heat solver,
//! conditional expectations of simple random variables, Itô integrals,
//! stopping times and the Itô formula.
//!
//! Every engine is generic over the [`Scalar`] type; the aliases below fix
//! it to `f64` or `f32`.

pub mod conditional;
pub mod error;
pub mod formula;
pub mod gheat;
pub mod ito;
pub mod scalar;
pub mod sublinear;

pub use error::{Error, Result};
pub use scalar::{Mat2, Scalar, Vec2};

pub type UncertaintySetF64 = sublinear::UncertaintySet<f64>;
pub type PartitionF64 = sublinear::Partition<f64>;
pub type ScenarioTreeF64 = sublinear::ScenarioTree<f64>;
pub type LatticeF64 = sublinear::Lattice<f64>;
pub type PathBundleF64 = sublinear::PathBundle<f64>;
pub type Grid1DF64 = gheat::Grid1D<f64>;
pub type SimpleProcessF64 = ito::SimpleProcess<f64>;
pub type StoppingTimeF64 = ito::StoppingTime<f64>;
pub type TestFunctionF64 = formula::TestFunction<f64>;
pub type CoefficientTripleF64 = formula::CoefficientTriple<f64>;

pub type UncertaintySetF32 = sublinear::UncertaintySet<f32>;
pub type PartitionF32 = sublinear::Partition<f32>;
pub type ScenarioTreeF32 = sublinear::ScenarioTree<f32>;
pub type LatticeF32 = sublinear::Lattice<f32>;
pub type PathBundleF32 = sublinear::PathBundle<f32>;
pub type Grid1DF32 = gheat::Grid1D<f32>;
pub type SimpleProcessF32 = ito::SimpleProcess<f32>;
pub type StoppingTimeF32 = ito::StoppingTime<f32>;
pub type TestFunctionF32 = formula::TestFunction<f32>;
pub type CoefficientTripleF32 = formula::CoefficientTriple<f32>;
