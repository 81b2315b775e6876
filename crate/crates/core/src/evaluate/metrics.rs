use serde::{Deserialize, Serialize};

use super::EvalError;

/// Regression error summary in target units.
///
/// `percent_error` is `100·MAE/mean(|y_true|)` and is absent when every
/// target is zero; `r2` is absent when the targets are constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    pub percent_error: Option<f64>,
    pub r2: Option<f64>,
}

pub fn compute_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<Metrics, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch {
            expected: y_true.len(),
            found: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = y_true.len() as f64;
    let mut sse = 0.0;
    let mut sae = 0.0;
    let mut abs_sum = 0.0;
    for (t, p) in y_true.iter().zip(y_pred) {
        let e = p - t;
        sse += e * e;
        sae += e.abs();
        abs_sum += t.abs();
    }
    let mse = sse / n;
    let mae = sae / n;
    let percent_error = (abs_sum > 0.0).then(|| 100.0 * mae / (abs_sum / n));

    let constant = y_true.iter().all(|v| *v == y_true[0]);
    let r2 = if constant {
        None
    } else {
        let mean = y_true.iter().sum::<f64>() / n;
        let ss_tot: f64 = y_true.iter().map(|v| (v - mean).powi(2)).sum();
        Some(1.0 - sse / ss_tot)
    };
    Ok(Metrics {
        mse,
        rmse: mse.sqrt(),
        mae,
        percent_error,
        r2,
    })
}
