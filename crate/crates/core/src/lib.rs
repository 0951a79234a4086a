//! Estimation of a target transition matrix and stationary distribution from
//! an ensemble of heterogeneous, possibly non-stationary Markov chain
//! trajectories, with the matching finite-sample error bounds.

pub mod bounds;
pub mod error;
pub mod estimate;
pub mod io;
pub mod matrix;
pub mod rng;
pub mod simulate;
pub mod spectral;
pub mod trajectory;

pub use bounds::{BoundConstants, ChainModel, HeterogeneityMetrics, TailBound};
pub use error::{Error, Result};
pub use estimate::{CountTables, Estimates};
pub use matrix::{Distribution, StateSpace, StochasticMatrix};
pub use simulate::{ChainSpec, CorruptionMode, EnsembleSpec, InitPolicy};
pub use spectral::{PseudoSpectralGap, SpectralSummary};
pub use trajectory::TrajectoryMatrix;
