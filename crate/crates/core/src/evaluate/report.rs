use std::fmt::Write as _;

use super::compare::ComparisonReport;
use super::metrics::Metrics;

const METRIC_COLUMNS: [&str; 5] = ["mse", "rmse", "mae", "percent_error", "r2"];

pub const PERCENT_ERROR_DEFINITION: &str = "percent_error = 100 * MAE / mean(|y_true|)";

fn metric_cells(m: Option<&Metrics>) -> Vec<String> {
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    match m {
        Some(m) => vec![
            m.mse.to_string(),
            m.rmse.to_string(),
            m.mae.to_string(),
            opt(m.percent_error),
            opt(m.r2),
        ],
        None => vec![String::new(); METRIC_COLUMNS.len()],
    }
}

/// `comparison.csv`: one row per model, no timing columns so that reruns
/// with the same seed are byte-identical.
pub fn comparison_csv(report: &ComparisonReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "model".to_string(),
        "hyperparameters".to_string(),
        "status".to_string(),
    ];
    for split in ["train", "test"] {
        header.extend(METRIC_COLUMNS.iter().map(|m| format!("{split}_{m}")));
    }
    w.write_record(&header).expect("in-memory write");
    for row in &report.rows {
        let status = match &row.error {
            None => "ok".to_string(),
            Some(e) => format!("failed: {e}"),
        };
        let mut record = vec![row.model.clone(), row.hyperparameters.clone(), status];
        record.extend(metric_cells(row.train.as_ref()));
        record.extend(metric_cells(row.test.as_ref()));
        w.write_record(&record).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 text")
}

/// `timings.csv`: wall-clock fit time per model.
pub fn timings_csv(report: &ComparisonReport) -> String {
    let mut out = String::from("model,fit_seconds\n");
    for row in &report.rows {
        let _ = writeln!(out, "{},{}", row.model, row.wall_time_seconds);
    }
    out
}

fn fmt_opt(v: Option<f64>, precision: usize) -> String {
    v.map(|v| format!("{v:.precision$}"))
        .unwrap_or_else(|| "-".into())
}

/// Fixed-width summary for terminals and logs.
pub fn comparison_table(report: &ComparisonReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "model comparison: {} train / {} test rows, seed {}{}",
        report.n_train,
        report.n_test,
        report.seed,
        if report.paper_order {
            ", standardized before split"
        } else {
            ""
        }
    );
    let _ = writeln!(out, "({PERCENT_ERROR_DEFINITION})");
    let _ = writeln!(
        out,
        "{:<14} {:>12} {:>12} {:>10} {:>10} {:>9} {:>9}  hyperparameters",
        "model", "train_mse", "test_mse", "test_mae", "test_%err", "test_r2", "fit_s",
    );
    for row in &report.rows {
        match (&row.train, &row.test) {
            (Some(train), Some(test)) => {
                let _ = writeln!(
                    out,
                    "{:<14} {:>12.6} {:>12.6} {:>10.4} {:>10} {:>9} {:>9.2}  {}",
                    row.model,
                    train.mse,
                    test.mse,
                    test.mae,
                    fmt_opt(test.percent_error, 2),
                    fmt_opt(test.r2, 4),
                    row.wall_time_seconds,
                    row.hyperparameters
                );
            }
            _ => {
                let _ = writeln!(
                    out,
                    "{:<14} FAILED: {}",
                    row.model,
                    row.error.as_deref().unwrap_or("unknown error")
                );
            }
        }
    }
    match &report.best_model {
        Some(best) => {
            let _ = writeln!(out, "best model (lowest test mse): {best}");
        }
        None => {
            let _ = writeln!(out, "no model trained successfully");
        }
    }
    out
}
