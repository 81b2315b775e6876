//! Principal component analysis through the covariance eigendecomposition.

use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::numeric::{covariance_matrix, sym_eigen_default, Matrix};

/// How many principal axes to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PcaTarget {
    Components(usize),
    /// Smallest k whose cumulative explained ratio reaches the threshold.
    VarianceThreshold(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// k×d, one principal axis per row.
    pub components: Matrix,
    /// Explained ratio of each kept axis.
    pub explained_ratio: Vec<f64>,
    /// Eigenvalue of each kept axis.
    pub explained_variance: Vec<f64>,
    /// Explained ratio of every axis, kept or not (scree data).
    pub full_explained_ratio: Vec<f64>,
    pub total_variance: f64,
}

/// Ties at exactly the threshold resolve to the smaller k.
pub fn components_for_variance(explained_ratio: &[f64], threshold: f64) -> usize {
    let mut cumulative = 0.0;
    for (i, r) in explained_ratio.iter().enumerate() {
        cumulative += r;
        if cumulative >= threshold - 1e-12 {
            return i + 1;
        }
    }
    explained_ratio.len()
}

pub fn pca_fit(x: &Matrix, target: PcaTarget) -> Result<PcaModel, PreprocessError> {
    let d = x.n_cols();
    if d == 0 {
        return Err(PreprocessError::InvalidComponents(
            "no input columns".into(),
        ));
    }
    let cov = covariance_matrix(x)?;
    let eig = sym_eigen_default(&cov)?;
    // rounding can leave tiny negative eigenvalues on rank-deficient data
    let variances: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
    let total_variance: f64 = variances.iter().sum();
    let full_explained_ratio: Vec<f64> = if total_variance > 0.0 {
        variances.iter().map(|v| v / total_variance).collect()
    } else {
        vec![0.0; d]
    };

    let k = match target {
        PcaTarget::Components(k) => {
            if k == 0 || k > d {
                return Err(PreprocessError::InvalidComponents(format!(
                    "asked for {k} components of {d}"
                )));
            }
            k
        }
        PcaTarget::VarianceThreshold(t) => {
            if !(t > 0.0 && t <= 1.0) {
                return Err(PreprocessError::InvalidComponents(format!(
                    "variance threshold {t} outside (0, 1]"
                )));
            }
            components_for_variance(&full_explained_ratio, t).max(1)
        }
    };

    let mut components = Matrix::zeros(k, d);
    for c in 0..k {
        for j in 0..d {
            components.set(c, j, eig.vectors.get(j, c));
        }
    }
    Ok(PcaModel {
        mean: x.column_means(),
        components,
        explained_ratio: full_explained_ratio[..k].to_vec(),
        explained_variance: variances[..k].to_vec(),
        full_explained_ratio,
        total_variance,
    })
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.n_rows()
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    /// `(X − mean)·componentsᵀ`.
    pub fn transform(&self, x: &Matrix) -> Result<Matrix, PreprocessError> {
        if x.n_cols() != self.input_dim() {
            return Err(PreprocessError::DimensionMismatch {
                expected: self.input_dim(),
                found: x.n_cols(),
            });
        }
        let mut out = Matrix::zeros(x.n_rows(), self.n_components());
        let mut centered = vec![0.0; self.input_dim()];
        for i in 0..x.n_rows() {
            self.transform_row_into(x.row(i), &mut centered, out.row_mut(i));
        }
        Ok(out)
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        let mut centered = vec![0.0; self.input_dim()];
        let mut out = vec![0.0; self.n_components()];
        self.transform_row_into(row, &mut centered, &mut out);
        out
    }

    fn transform_row_into(&self, row: &[f64], centered: &mut [f64], out: &mut [f64]) {
        for ((c, v), m) in centered.iter_mut().zip(row).zip(&self.mean) {
            *c = v - m;
        }
        for (k, o) in out.iter_mut().enumerate() {
            *o = crate::numeric::dot(self.components.row(k), centered);
        }
    }
}
