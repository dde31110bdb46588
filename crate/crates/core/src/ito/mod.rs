//! Simple processes, stochastic integrals and stopping times.

pub mod bounds;
pub mod integral;
pub mod process;
pub mod stopping;

pub use bounds::{conditional_moment_bounds, MomentBoundsReport};
pub use integral::{
    bochner_integral, integrate, ito_integral, mp_norm, mp_norm_mc, qv_integral, stopped_integral,
    truncation_gap_moments, IntegralResult, Integrator, StoppedIntegral, NORM_EXPONENTS,
};
pub use process::{AdaptedFn, Bound, SimpleProcess};
pub use stopping::{grid_stopping_time, StopRule, StoppingTime};
