use thiserror::Error;

use crate::numeric::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("expected {expected} input features, found {found}")]
pub struct DimensionMismatch {
    pub expected: usize,
    pub found: usize,
}

/// Anything that maps a feature row to a real prediction.
pub trait Regressor {
    fn input_dim(&self) -> usize;

    /// Caller guarantees `x.len() == self.input_dim()`.
    fn predict_row_unchecked(&self, x: &[f64]) -> f64;

    fn predict_row(&self, x: &[f64]) -> Result<f64, DimensionMismatch> {
        if x.len() != self.input_dim() {
            return Err(DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        Ok(self.predict_row_unchecked(x))
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<f64>, DimensionMismatch> {
        if x.n_cols() != self.input_dim() {
            return Err(DimensionMismatch {
                expected: self.input_dim(),
                found: x.n_cols(),
            });
        }
        Ok(x.rows().map(|r| self.predict_row_unchecked(r)).collect())
    }
}
