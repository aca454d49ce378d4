//! Method-independent accuracy bounds for finite-dimensional inverse
//! problems.
//!
//! Given a forward model `F(x, e)` with bounded noise, [`sampling`] builds
//! approximate feasible sets `{x : ∃e, F(x, e) = y}` for a batch of
//! measurements, [`bounds`] turns them into the average kernel size (a lower
//! and upper bound on the best achievable reconstruction loss) and checks
//! arbitrary reconstruction maps against it, and [`symmetric`] computes the
//! linear-time symmetric variant for linear models with additive noise.

pub mod bounds;
pub mod dataset;
pub mod demo;
pub mod error;
pub mod forward;
pub mod io;
pub mod norm;
pub mod sampling;
pub mod summation;
pub mod symmetric;

pub use bounds::{kersize, optimal_map_value, verify_bounds, BoundReport, KersizeResult};
pub use dataset::{
    loss, FeasibleSet, FeasibleSetCollection, MeasurementVector, Pair, PairedDataset, Predictions, SignalVector,
};
pub use error::{Error, Result};
pub use forward::{feasibility, ForwardModelSpec, ForwardOperator, NoiseSpec};
pub use norm::{p_dist, InnerExponent, NormSpec};
pub use sampling::{build_feasible_sets, sample_feasible, SamplerSpec};
pub use symmetric::{kernel_projection, pseudoinverse, reflect, skersize, KernelProjector, ProjectionMode};
