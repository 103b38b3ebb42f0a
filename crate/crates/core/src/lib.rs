//! Randomized learning-augmented online bidding.
//!
//! Strategies are represented as bidding functions `B`: the randomized
//! bid sequence `(B(i + λ))_i` with `λ ~ U[0, 1]`. The crate builds the
//! classical strategy families, the Pareto-optimal function, LP-based
//! lower-bound certificates, noisy-prediction simulations and the
//! incremental-median application.

pub mod classes;
pub mod error;
pub mod evaluation;
pub mod format;
pub mod function;
pub mod lower_bound;
pub mod median;
pub mod numerics;
pub mod pareto;
pub mod rng;

pub use error::{Error, Result};
pub use function::{BiddingFunction, GridSpec, Segment, SegmentKind, Side};
pub use numerics::{SolverConfig, WorkBounds};
