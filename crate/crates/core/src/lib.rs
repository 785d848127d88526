//! Online characterization of the loss incurred by simplifying particle-belief
//! planning problems.
//!
//! The crate builds coupled extended belief trees for two candidate policies,
//! evaluates original and particle-subsampled returns with differential-entropy
//! rewards, derives stochastic bounds on the original return from the simplified
//! one, and turns those into the bound-loss distribution and its guarantee
//! curve `beta`.

pub mod belief;
pub mod bounds;
pub mod error;
pub mod experiment;
pub mod loss;
pub mod models;
pub mod reward;
pub mod rng;
pub mod scenario;
pub mod simplification;
pub mod tree;

pub use error::{Error, Result};
