//! Accelerated stochastic variance-reduced ADMM for generalized-lasso style
//! problems `min f(x) + g(y)  s.t. Ax + By = c`.

pub mod data_io;
pub mod linalg;
pub mod problem;
pub mod solvers;
pub mod synthetic;
pub mod verify;

/// Library version recorded in benchmark manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
