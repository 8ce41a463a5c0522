//! Meta-surrogate benchmarking for hyperparameter optimization.

pub mod assessment;
pub mod bnn;
pub mod dataset;
pub mod encoder;
pub mod error;
pub mod kernel;
pub mod lbfgs;
pub mod linalg;
pub mod optimizers;
pub mod pipeline;
pub mod quadrature;
pub mod sobol;
pub mod synthetic;
pub mod tasks;
pub mod space;

pub use error::{Error, Result};
