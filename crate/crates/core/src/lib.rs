//! Gaussian-process covariance estimation under inequality constraints.

pub mod constraints;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod gp;
pub mod kernels;
pub mod prediction;
pub mod linalg;
pub mod rng;
pub mod sampler;
pub mod special;

pub use error::{Error, Result};
