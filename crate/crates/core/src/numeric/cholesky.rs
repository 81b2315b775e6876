use super::{Matrix, NumericError, Result};

/// Lower-triangular Cholesky factor `L` with `A = L·Lᵀ`.
///
/// A pivot is rejected when it is not larger than `n·ε` times the original
/// diagonal entry; exact singularity rarely survives rounding as a clean zero.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    let (n, m) = a.shape();
    if n != m {
        return Err(NumericError::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{n}x{m}"),
        });
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = a.get(j, j);
        for k in 0..j {
            pivot -= l.get(j, k) * l.get(j, k);
        }
        let floor = n as f64 * f64::EPSILON * a.get(j, j).abs();
        if !(pivot > floor) {
            return Err(NumericError::NotPositiveDefinite {
                pivot: j,
                value: pivot,
            });
        }
        let ljj = pivot.sqrt();
        l.set(j, j, ljj);
        for i in (j + 1)..n {
            let mut acc = a.get(i, j);
            for k in 0..j {
                acc -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, acc / ljj);
        }
    }
    Ok(l)
}

/// Solves `A·x = b` for symmetric positive definite `A`.
pub fn solve_spd(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.n_rows() {
        return Err(NumericError::DimensionMismatch {
            expected: format!("right-hand side of length {}", a.n_rows()),
            found: format!("{}", b.len()),
        });
    }
    let l = cholesky(a)?;
    let n = b.len();
    // forward: L·z = b
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut acc = b[i];
        for k in 0..i {
            acc -= l.get(i, k) * z[k];
        }
        z[i] = acc / l.get(i, i);
    }
    // backward: Lᵀ·x = z
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = z[i];
        for k in (i + 1)..n {
            acc -= l.get(k, i) * x[k];
        }
        x[i] = acc / l.get(i, i);
    }
    Ok(x)
}
