//! Exact Gaussian-process regression on sparse covariance matrices.
//!
//! Compactly supported, non-stationary kernels return exact zeros for
//! uncorrelated pairs. The covariance is assembled block by block into a
//! sparse symmetric matrix, and training and prediction run on sparse
//! solves and a sparse Cholesky log-determinant. A dense reference GP is
//! kept alongside as an oracle.

pub mod assembly;
pub mod error;
pub mod gp;
pub mod harness;
pub mod kernel;
pub mod mcmc;
pub mod metrics;
pub mod sparse;

pub use error::{Error, Result};
