//! Cyclic Jacobi eigensolver for real symmetric matrices.

use super::{Matrix, NumericError, Result};

pub const DEFAULT_MAX_SWEEPS: usize = 100;

/// Eigenpairs sorted by descending eigenvalue.
///
/// Column `i` of `vectors` is the unit eigenvector for `values[i]`. Each
/// eigenvector is oriented so that its largest-magnitude entry is positive
/// (first such entry on near-ties), which makes the basis reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Matrix,
    pub sweeps: usize,
}

impl EigenResult {
    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i)
    }

    /// `V · diag(λ) · Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.values.len();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for (k, lambda) in self.values.iter().enumerate() {
                    acc += self.vectors.get(i, k) * lambda * self.vectors.get(j, k);
                }
                out.set(i, j, acc);
            }
        }
        out
    }
}

/// Jacobi with an off-diagonal threshold relative to the matrix scale.
pub fn sym_eigen_default(a: &Matrix) -> Result<EigenResult> {
    let tol = 1e-14 * a.max_abs().max(f64::MIN_POSITIVE);
    sym_eigen(a, tol, DEFAULT_MAX_SWEEPS)
}

/// Rotates until every off-diagonal magnitude is at most `tol`.
pub fn sym_eigen(a: &Matrix, tol: f64, max_sweeps: usize) -> Result<EigenResult> {
    let (n, m) = a.shape();
    if n != m {
        return Err(NumericError::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{n}x{m}"),
        });
    }
    let scale = a.max_abs();
    let asymmetry = a.asymmetry();
    if asymmetry > 1e-9 * scale {
        return Err(NumericError::NotSymmetric { asymmetry });
    }

    // work on the exactly symmetric part
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            w.set(i, j, 0.5 * (a.get(i, j) + a.get(j, i)));
        }
    }
    let mut v = Matrix::identity(n);

    let mut sweeps = 0;
    loop {
        if max_off_diagonal(&w) <= tol {
            break;
        }
        if sweeps == max_sweeps {
            return Err(NumericError::NoConvergence { max_sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                rotate(&mut w, &mut v, p, q, apq);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| w.get(i, i)).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]));

    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src);
        orient(&mut col);
        for (i, x) in col.into_iter().enumerate() {
            vectors.set(i, dst, x);
        }
    }
    Ok(EigenResult {
        values,
        vectors,
        sweeps,
    })
}

fn max_off_diagonal(w: &Matrix) -> f64 {
    let n = w.n_rows();
    let mut worst: f64 = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            worst = worst.max(w.get(p, q).abs());
        }
    }
    worst
}

/// Applies the rotation that zeroes `w[p][q]`, accumulating it into `v`.
fn rotate(w: &mut Matrix, v: &mut Matrix, p: usize, q: usize, apq: f64) {
    let n = w.n_rows();
    let app = w.get(p, p);
    let aqq = w.get(q, q);
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.is_infinite() {
        0.0
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = w.get(k, p);
        let akq = w.get(k, q);
        let new_kp = c * akp - s * akq;
        let new_kq = s * akp + c * akq;
        w.set(k, p, new_kp);
        w.set(p, k, new_kp);
        w.set(k, q, new_kq);
        w.set(q, k, new_kq);
    }
    w.set(p, p, app - t * apq);
    w.set(q, q, aqq + t * apq);
    w.set(p, q, 0.0);
    w.set(q, p, 0.0);

    for k in 0..n {
        let vkp = v.get(k, p);
        let vkq = v.get(k, q);
        v.set(k, p, c * vkp - s * vkq);
        v.set(k, q, s * vkp + c * vkq);
    }
}

fn orient(col: &mut [f64]) {
    let max_mag = col.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if max_mag == 0.0 {
        return;
    }
    let lead = col
        .iter()
        .position(|x| x.abs() >= max_mag * (1.0 - 1e-12))
        .unwrap_or(0);
    if col[lead] < 0.0 {
        col.iter_mut().for_each(|x| *x = -*x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::RandomStream;

    fn random_symmetric(n: usize, seed: u64) -> Matrix {
        let mut s = RandomStream::new(seed);
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = s.next_normal();
                a.set(i, j, v);
                a.set(j, i, v);
            }
        }
        a
    }

    #[test]
    fn identity_has_unit_eigenvalues() {
        let r = sym_eigen_default(&Matrix::identity(3)).unwrap();
        assert_eq!(r.values, vec![1.0, 1.0, 1.0]);
        assert_eq!(r.sweeps, 0);
    }

    #[test]
    fn two_by_two_hand_solution() {
        let a = Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]);
        let r = sym_eigen_default(&a).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.values[0] - 3.0).abs() < 1e-14);
        assert!((r.values[1] - 1.0).abs() < 1e-14);
        let v0 = r.vector(0);
        let v1 = r.vector(1);
        assert!((v0[0] - h).abs() < 1e-14 && (v0[1] - h).abs() < 1e-14);
        assert!((v1[0] - h).abs() < 1e-14 && (v1[1] + h).abs() < 1e-14);
    }

    #[test]
    fn reconstructs_random_six_by_six() {
        for seed in 0..5 {
            let a = random_symmetric(6, seed);
            let r = sym_eigen_default(&a).unwrap();
            let back = r.reconstruct();
            for (x, y) in back.data().iter().zip(a.data()) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn trace_and_orthonormality() {
        let a = random_symmetric(8, 42);
        let r = sym_eigen_default(&a).unwrap();
        let sum: f64 = r.values.iter().sum();
        assert!((sum - a.trace()).abs() <= 1e-8 * a.trace().abs().max(1.0));
        let vtv = r.vectors.transpose().matmul(&r.vectors).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((vtv.get(i, j) - expect).abs() < 1e-8);
            }
        }
        assert!(r.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn eigen_equation_holds() {
        let a = random_symmetric(5, 7);
        let r = sym_eigen_default(&a).unwrap();
        for i in 0..5 {
            let v = r.vector(i);
            let av = a.mat_vec(&v).unwrap();
            for (x, y) in av.iter().zip(&v) {
                assert!((x - r.values[i] * y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_asymmetric_input() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]);
        assert!(matches!(
            sym_eigen_default(&a),
            Err(NumericError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn reports_sweep_exhaustion() {
        let a = random_symmetric(6, 1);
        assert_eq!(
            sym_eigen(&a, 0.0, 1),
            Err(NumericError::NoConvergence { max_sweeps: 1 })
        );
    }

    #[test]
    fn largest_entry_is_positive() {
        let a = random_symmetric(7, 99);
        let r = sym_eigen_default(&a).unwrap();
        for i in 0..7 {
            let v = r.vector(i);
            let lead = v
                .iter()
                .cloned()
                .fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(lead > 0.0);
        }
    }
}
