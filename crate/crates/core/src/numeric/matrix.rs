use serde::{Deserialize, Serialize};

use super::{dot, NumericError, Result};

/// Row-major dense matrix of finite reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Matrix {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_vec(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(NumericError::DimensionMismatch {
                expected: format!("{} values ({n_rows}x{n_cols})", n_rows * n_cols),
                found: format!("{} values", data.len()),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(NumericError::NonFinite { index });
        }
        Ok(Matrix {
            n_rows,
            n_cols,
            data,
        })
    }

    /// Builds a matrix from equally long rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), n_cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            n_rows: rows.len(),
            n_cols,
            data,
        }
    }

    pub fn column_vector(values: &[f64]) -> Self {
        Matrix {
            n_rows: values.len(),
            n_cols: 1,
            data: values.to_vec(),
        }
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero chunk size
        let width = self.n_cols.max(1);
        self.data
            .chunks_exact(width)
            .take(if self.n_cols == 0 { 0 } else { self.n_rows })
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.n_cols != other.n_rows {
            return Err(NumericError::DimensionMismatch {
                expected: format!("{} rows on the right operand", self.n_cols),
                found: format!("{}", other.n_rows),
            });
        }
        let mut out = Matrix::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            let out_row = &mut out.data[i * other.n_cols..(i + 1) * other.n_cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`, which keeps both operands walking contiguous rows.
    pub fn matmul_transposed(&self, other: &Matrix) -> Result<Matrix> {
        if self.n_cols != other.n_cols {
            return Err(NumericError::DimensionMismatch {
                expected: format!("{} columns on the right operand", self.n_cols),
                found: format!("{}", other.n_cols),
            });
        }
        let mut out = Matrix::zeros(self.n_rows, other.n_rows);
        for i in 0..self.n_rows {
            let a = self.row(i);
            for k in 0..other.n_rows {
                out.data[i * other.n_rows + k] = dot(a, other.row(k));
            }
        }
        Ok(out)
    }

    pub fn mat_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n_cols {
            return Err(NumericError::DimensionMismatch {
                expected: format!("vector of length {}", self.n_cols),
                found: format!("{}", v.len()),
            });
        }
        Ok(self.rows().map(|r| dot(r, v)).collect())
    }

    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            n_rows: indices.len(),
            n_cols: self.n_cols,
            data,
        }
    }

    pub fn select_columns(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.n_rows);
        for i in 0..self.n_rows {
            let row = self.row(i);
            data.extend(indices.iter().map(|&j| row[j]));
        }
        Matrix {
            n_rows: self.n_rows,
            n_cols: indices.len(),
            data,
        }
    }

    /// Appends the columns of `other` to the right of `self`.
    pub fn hstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.n_rows != other.n_rows {
            return Err(NumericError::DimensionMismatch {
                expected: format!("{} rows", self.n_rows),
                found: format!("{}", other.n_rows),
            });
        }
        let n_cols = self.n_cols + other.n_cols;
        let mut data = Vec::with_capacity(self.n_rows * n_cols);
        for i in 0..self.n_rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Matrix {
            n_rows: self.n_rows,
            n_cols,
            data,
        })
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.n_cols];
        for row in self.rows() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = self.n_rows as f64;
        means.iter_mut().for_each(|m| *m /= n);
        means
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.n_rows.min(self.n_cols))
            .map(|i| self.get(i, i))
            .sum()
    }

    /// Largest `|a_ij − a_ji|`; infinite for non-square input.
    pub fn asymmetry(&self) -> f64 {
        if self.n_rows != self.n_cols {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.n_rows {
            for j in (i + 1)..self.n_cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Sample covariance of the columns of `x` (n−1 denominator).
pub fn covariance_matrix(x: &Matrix) -> Result<Matrix> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(NumericError::TooFewSamples {
            needed: 2,
            found: n,
        });
    }
    let means = x.column_means();
    let mut cov = Matrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for row in x.rows() {
        for ((c, v), m) in centered.iter_mut().zip(row).zip(&means) {
            *c = v - m;
        }
        for j in 0..d {
            let cj = centered[j];
            for k in j..d {
                cov.data[j * d + k] += cj * centered[k];
            }
        }
    }
    let denom = (n - 1) as f64;
    for j in 0..d {
        for k in j..d {
            let v = cov.get(j, k) / denom;
            cov.set(j, k, v);
            cov.set(k, j, v);
        }
    }
    Ok(cov)
}
