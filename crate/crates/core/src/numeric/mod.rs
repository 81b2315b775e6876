//! Dense linear algebra and seeded randomness shared by every model.
//!
//! Everything here works on small, dense, row-major matrices: the pipeline
//! never has more than a few dozen descriptor columns, so the kernels favour
//! clarity and a fixed summation order over blocking or SIMD.

mod cholesky;
mod eigen;
mod matrix;
mod rng;

pub use cholesky::{cholesky, solve_spd};
pub use eigen::{sym_eigen, sym_eigen_default, EigenResult, DEFAULT_MAX_SWEEPS};
pub use matrix::{covariance_matrix, Matrix};
pub use rng::{child_seed, splitmix64_mix, RandomStream};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("too few samples: need at least {needed}, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("Jacobi eigensolver did not converge within {max_sweeps} sweeps")]
    NoConvergence { max_sweeps: usize },
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
}

pub type Result<T> = std::result::Result<T, NumericError>;

/// Inner product with a strictly sequential accumulation order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance (divides by n).
pub fn population_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}
