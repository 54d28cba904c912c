//! Local Iterative Feature Extraction (LIFE) for single-hidden-layer ReLU networks.

pub mod datasets;
pub mod diagnostics;
pub mod error;
pub mod interpret;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod pruning;
pub mod sampling;
pub mod seed;

pub use error::{LifeError, Result};
