//! Dense and sparse kernels used by the solvers.

mod sparse;
mod spd;
mod spectral;
mod vector;

use thiserror::Error;

pub use sparse::SparseMatrix;
pub use spd::{factor_spd, factor_spd_with_limit, solve_spd, SpdFactorization, DEFAULT_FACTOR_DIM_LIMIT};
pub use spectral::{spectral_norm_sq, DEFAULT_SPECTRAL_MAX_ITERS, DEFAULT_SPECTRAL_TOL};
pub use vector::{axpy, combine2, combine3, dot, norm, norm_sq, sub, DenseVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("{op}: dimension mismatch, expected length {expected}, found {found}")]
    DimensionMismatch { op: &'static str, expected: usize, found: usize },
    #[error("entry ({row}, {col}) out of bounds for {rows}x{cols} matrix")]
    IndexOutOfBounds { row: usize, col: usize, rows: usize, cols: usize },
    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("malformed CSR arrays: {0}")]
    MalformedCsr(&'static str),
    #[error("power iteration did not converge in {iters} iterations (last Rayleigh quotients {previous}, {last})")]
    NoConvergence { iters: usize, last: f64, previous: f64 },
    #[error("matrix not positive definite: pivot {pivot} is {value}")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("dense factorization of dimension {dim} exceeds limit {limit}; use the linearized x-update (chi = 1)")]
    UnsupportedSize { dim: usize, limit: usize },
    #[error("{0}")]
    InvalidArgument(String),
}
