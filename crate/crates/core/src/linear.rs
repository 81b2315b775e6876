//! Ordinary least squares and L1-penalized (Lasso) linear regression.
//!
//! Lasso minimizes `(1/2n)·‖y − Xw − b‖² + λ‖w‖₁` by cyclic coordinate
//! descent. Each coordinate step is the closed-form soft-threshold update,
//! and the intercept is refit to the mean residual after every sweep.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DimensionMismatch, Regressor};
use crate::numeric::{dot, mean, solve_spd, Matrix, NumericError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinearError {
    #[error("need more rows than features (n = {n}, d = {d})")]
    TooFewSamples { n: usize, d: usize },
    #[error("target length {found} does not match {expected} rows")]
    LengthMismatch { expected: usize, found: usize },
    #[error("normal equations are rank deficient: {0}")]
    RankDeficient(NumericError),
    #[error("feature {feature} has variance {variance}; lasso expects standardized columns")]
    NotStandardized { feature: usize, variance: f64 },
    #[error(
        "coordinate descent did not converge in {iterations} sweeps (last change {last_change:e})"
    )]
    NoConvergence { iterations: usize, last_change: f64 },
    #[error("invalid lambda grid: {0}")]
    InvalidGrid(String),
    #[error("negative or non-finite lambda {0}")]
    InvalidLambda(f64),
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
}

fn default_names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub trained_on: Vec<String>,
}

impl LinearModel {
    pub fn with_feature_names(mut self, names: Vec<String>) -> Self {
        assert_eq!(names.len(), self.weights.len());
        self.trained_on = names;
        self
    }
}

impl Regressor for LinearModel {
    fn input_dim(&self) -> usize {
        self.weights.len()
    }

    fn predict_row_unchecked(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.intercept
    }
}

fn check_xy(x: &Matrix, y: &[f64]) -> Result<(), LinearError> {
    if y.len() != x.n_rows() {
        return Err(LinearError::LengthMismatch {
            expected: x.n_rows(),
            found: y.len(),
        });
    }
    Ok(())
}

/// Least squares with intercept.
///
/// The intercept column is eliminated by centering (the Schur complement of
/// the augmented normal equations), and the remaining system is equilibrated
/// to unit diagonal before the Cholesky solve. If the factorization fails a
/// single ridge jitter of `1e-10·trace/d` is tried before giving up.
pub fn linear_fit(x: &Matrix, y: &[f64]) -> Result<LinearModel, LinearError> {
    check_xy(x, y)?;
    let (n, d) = x.shape();
    if n <= d {
        return Err(LinearError::TooFewSamples { n, d });
    }
    let x_mean = x.column_means();
    let y_mean = mean(y);

    let mut gram = Matrix::zeros(d, d);
    let mut rhs = vec![0.0; d];
    let mut centered = vec![0.0; d];
    for (row, &yi) in x.rows().zip(y) {
        for ((c, v), m) in centered.iter_mut().zip(row).zip(&x_mean) {
            *c = v - m;
        }
        let yc = yi - y_mean;
        for j in 0..d {
            rhs[j] += centered[j] * yc;
            for k in j..d {
                let v = gram.get(j, k) + centered[j] * centered[k];
                gram.set(j, k, v);
            }
        }
    }
    let scale: Vec<f64> = (0..d)
        .map(|j| {
            let s = gram.get(j, j).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    for j in 0..d {
        rhs[j] /= scale[j];
        for k in j..d {
            let v = gram.get(j, k) / (scale[j] * scale[k]);
            gram.set(j, k, v);
            gram.set(k, j, v);
        }
    }

    let solved = match solve_spd(&gram, &rhs) {
        Ok(w) => w,
        Err(_) => {
            let jitter = 1e-10 * gram.trace().max(f64::MIN_POSITIVE) / d.max(1) as f64;
            log::warn!("normal equations not positive definite; retrying with jitter {jitter:e}");
            let mut jittered = gram.clone();
            for j in 0..d {
                jittered.set(j, j, jittered.get(j, j) + jitter);
            }
            solve_spd(&jittered, &rhs).map_err(LinearError::RankDeficient)?
        }
    };
    let weights: Vec<f64> = solved.iter().zip(&scale).map(|(w, s)| w / s).collect();
    let intercept = y_mean - dot(&x_mean, &weights);
    Ok(LinearModel {
        weights,
        intercept,
        trained_on: default_names(d),
    })
}

/// `sign(z)·max(|z| − λ, 0)`.
#[inline]
pub fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoOptions {
    pub max_iters: usize,
    /// Convergence threshold on the largest coordinate (or intercept) change in a sweep.
    pub tol: f64,
    /// Return `NoConvergence` instead of an unconverged model.
    pub require_convergence: bool,
    /// Keep the penalized objective after every sweep.
    pub record_objective: bool,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            max_iters: 10_000,
            tol: 1e-7,
            require_convergence: true,
            record_objective: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub n_iterations: usize,
    pub converged: bool,
    pub trained_on: Vec<String>,
    /// Names of features whose weight is exactly nonzero.
    pub selected: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objective_trace: Vec<f64>,
}

impl LassoModel {
    pub fn with_feature_names(mut self, names: Vec<String>) -> Self {
        assert_eq!(names.len(), self.weights.len());
        self.selected = names
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w != 0.0)
            .map(|(n, _)| n.clone())
            .collect();
        self.trained_on = names;
        self
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len())
            .filter(|&j| self.weights[j] != 0.0)
            .collect()
    }

    pub fn as_linear(&self) -> LinearModel {
        LinearModel {
            weights: self.weights.clone(),
            intercept: self.intercept,
            trained_on: self.trained_on.clone(),
        }
    }
}

impl Regressor for LassoModel {
    fn input_dim(&self) -> usize {
        self.weights.len()
    }

    fn predict_row_unchecked(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.intercept
    }
}

pub fn predict_affine<M: Regressor>(model: &M, x: &[f64]) -> Result<f64, DimensionMismatch> {
    model.predict_row(x)
}

fn column_dot(x: &Matrix, j: usize, v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (row, vi) in x.rows().zip(v) {
        acc += row[j] * vi;
    }
    acc
}

/// Smallest λ at which every Lasso weight is zero: `max_j |x_jᵀ(y − ȳ)|/n`.
pub fn lambda_max(x: &Matrix, y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let y_bar = mean(y);
    let r: Vec<f64> = y.iter().map(|v| v - y_bar).collect();
    (0..x.n_cols())
        .map(|j| (column_dot(x, j, &r) / n).abs())
        .fold(0.0, f64::max)
}

/// `count` log-spaced values from `λ_max` down to `λ_max·min_ratio`.
pub fn default_lambda_grid(x: &Matrix, y: &[f64], count: usize, min_ratio: f64) -> Vec<f64> {
    let top = lambda_max(x, y);
    if top == 0.0 || count == 0 {
        return vec![0.0];
    }
    if count == 1 {
        return vec![top];
    }
    let step = min_ratio.ln() / (count - 1) as f64;
    (0..count).map(|i| top * (step * i as f64).exp()).collect()
}

fn penalized_objective(residual: &[f64], weights: &[f64], lambda: f64) -> f64 {
    let n = residual.len() as f64;
    dot(residual, residual) / (2.0 * n) + lambda * weights.iter().map(|w| w.abs()).sum::<f64>()
}

pub fn lasso_fit(
    x: &Matrix,
    y: &[f64],
    lambda: f64,
    opts: &LassoOptions,
) -> Result<LassoModel, LinearError> {
    lasso_fit_from(x, y, lambda, opts, None)
}

/// Coordinate descent started from `start = (weights, intercept)` when given.
pub fn lasso_fit_from(
    x: &Matrix,
    y: &[f64],
    lambda: f64,
    opts: &LassoOptions,
    start: Option<(&[f64], f64)>,
) -> Result<LassoModel, LinearError> {
    check_xy(x, y)?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(LinearError::InvalidLambda(lambda));
    }
    let (n, d) = x.shape();
    if n == 0 {
        return Err(LinearError::TooFewSamples { n, d });
    }
    let nf = n as f64;

    // zero-variance columns stay at weight 0; everything else must be standardized
    let mut active = vec![true; d];
    let mut col_sq = vec![0.0; d];
    for j in 0..d {
        let col = x.column(j);
        let variance = crate::numeric::population_variance(&col);
        if variance == 0.0 {
            active[j] = false;
            continue;
        }
        if !(0.9..=1.1).contains(&variance) {
            return Err(LinearError::NotStandardized {
                feature: j,
                variance,
            });
        }
        col_sq[j] = dot(&col, &col) / nf;
    }

    let mut weights = match start {
        Some((w, _)) => {
            if w.len() != d {
                return Err(DimensionMismatch {
                    expected: d,
                    found: w.len(),
                }
                .into());
            }
            w.iter()
                .zip(&active)
                .map(|(w, a)| if *a { *w } else { 0.0 })
                .collect()
        }
        None => vec![0.0; d],
    };
    let mut residual: Vec<f64> = x
        .rows()
        .zip(y)
        .map(|(row, yi)| yi - dot(row, &weights))
        .collect();
    let mut intercept = mean(&residual);
    residual.iter_mut().for_each(|r| *r -= intercept);

    let mut objective_trace = Vec::new();
    if opts.record_objective {
        objective_trace.push(penalized_objective(&residual, &weights, lambda));
    }

    let mut converged = false;
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    while iterations < opts.max_iters {
        iterations += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..d {
            if !active[j] {
                continue;
            }
            let old = weights[j];
            let z = column_dot(x, j, &residual) / nf + col_sq[j] * old;
            let new = soft_threshold(z, lambda) / col_sq[j];
            if new != old {
                let delta = new - old;
                for (r, row) in residual.iter_mut().zip(x.rows()) {
                    *r -= row[j] * delta;
                }
                weights[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        let shift = mean(&residual);
        if shift != 0.0 {
            intercept += shift;
            residual.iter_mut().for_each(|r| *r -= shift);
            max_change = max_change.max(shift.abs());
        }
        if opts.record_objective {
            objective_trace.push(penalized_objective(&residual, &weights, lambda));
        }
        last_change = max_change;
        if max_change < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged && opts.require_convergence {
        return Err(LinearError::NoConvergence {
            iterations,
            last_change,
        });
    }

    Ok(LassoModel {
        weights,
        intercept,
        lambda,
        n_iterations: iterations,
        converged,
        trained_on: default_names(d),
        selected: Vec::new(),
        objective_trace,
    }
    .with_feature_names(default_names(d)))
}

/// Fits every λ of a strictly descending, nonnegative grid, warm-starting
/// each fit from the previous solution.
/// A path grid must be nonempty, finite, nonnegative and strictly descending.
pub(crate) fn check_grid(lambdas: &[f64]) -> Result<(), LinearError> {
    if lambdas.is_empty() {
        return Err(LinearError::InvalidGrid("empty grid".into()));
    }
    if lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(LinearError::InvalidGrid(
            "lambdas must be finite and nonnegative".into(),
        ));
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(LinearError::InvalidGrid(
            "lambdas must be strictly descending".into(),
        ));
    }
    Ok(())
}

pub fn lasso_path(
    x: &Matrix,
    y: &[f64],
    lambdas: &[f64],
    opts: &LassoOptions,
) -> Result<Vec<LassoModel>, LinearError> {
    check_grid(lambdas)?;
    let mut path: Vec<LassoModel> = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let start = path.last().map(|m| (m.weights.as_slice(), m.intercept));
        let model = lasso_fit_from(x, y, lambda, opts, start)?;
        path.push(model);
    }
    Ok(path)
}

/// `feature,weight` CSV in model order.
pub fn coefficients_csv(names: &[String], weights: &[f64]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["feature", "weight"])
        .expect("in-memory write");
    for (name, weight) in names.iter().zip(weights) {
        w.write_record([name.as_str(), &weight.to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 names")
}
