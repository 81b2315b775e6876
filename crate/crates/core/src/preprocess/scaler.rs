use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::numeric::Matrix;

/// Per-feature z-scoring with population standard deviations.
///
/// Constant features are passed through untouched (mean 0, std 1) and listed
/// in `constant_features`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    #[serde(default)]
    pub constant_features: Vec<usize>,
}

pub fn fit_scaler(x: &Matrix) -> Result<Scaler, PreprocessError> {
    let n = x.n_rows();
    if n < 2 {
        return Err(PreprocessError::TooFewSamples {
            needed: 2,
            found: n,
        });
    }
    let mut means = x.column_means();
    let mut vars = vec![0.0; x.n_cols()];
    for row in x.rows() {
        for ((v, x), m) in vars.iter_mut().zip(row).zip(&means) {
            *v += (x - m) * (x - m);
        }
    }
    let mut stds: Vec<f64> = vars.iter().map(|v| (v / n as f64).sqrt()).collect();
    let mut constant_features = Vec::new();
    for j in 0..stds.len() {
        let column_scale = means[j].abs().max(f64::MIN_POSITIVE);
        if stds[j] == 0.0 || stds[j] <= 1e-14 * column_scale {
            log::warn!("feature {j} is constant; passing it through unscaled");
            constant_features.push(j);
            means[j] = 0.0;
            stds[j] = 1.0;
        }
    }
    Ok(Scaler {
        means,
        stds,
        constant_features,
    })
}

impl Scaler {
    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    fn check(&self, width: usize) -> Result<(), PreprocessError> {
        if width != self.means.len() {
            return Err(PreprocessError::DimensionMismatch {
                expected: self.means.len(),
                found: width,
            });
        }
        Ok(())
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix, PreprocessError> {
        self.check(x.n_cols())?;
        let mut out = x.clone();
        for i in 0..out.n_rows() {
            self.apply_row_in_place(out.row_mut(i));
        }
        Ok(out)
    }

    pub fn apply_row_in_place(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.means).zip(&self.stds) {
            *v = (*v - m) / s;
        }
    }

    pub fn invert(&self, x_std: &Matrix) -> Result<Matrix, PreprocessError> {
        self.check(x_std.n_cols())?;
        let mut out = x_std.clone();
        for i in 0..out.n_rows() {
            for ((v, m), s) in out.row_mut(i).iter_mut().zip(&self.means).zip(&self.stds) {
                *v = *v * s + m;
            }
        }
        Ok(out)
    }

    /// Single-column helpers for target scaling.
    pub fn apply_scalar(&self, v: f64) -> f64 {
        (v - self.means[0]) / self.stds[0]
    }

    pub fn invert_scalar(&self, v: f64) -> f64 {
        v * self.stds[0] + self.means[0]
    }
}
