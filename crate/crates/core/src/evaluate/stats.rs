use serde::{Deserialize, Serialize};

use crate::numeric::Matrix;

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Matrix,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.values.get(i, j))
    }

    /// Square CSV with a leading `feature` column.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = std::iter::once("feature")
            .chain(self.names.iter().map(String::as_str))
            .collect();
        w.write_record(&header).expect("in-memory write");
        for (i, name) in self.names.iter().enumerate() {
            let mut record = vec![name.clone()];
            record.extend(self.values.row(i).iter().map(|v| v.to_string()));
            w.write_record(&record).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 names")
    }
}

/// Pairwise Pearson coefficients of the columns of `data`.
///
/// Constant columns get 0 against every other column (and 1 on the diagonal).
pub fn pearson_matrix(data: &Matrix, names: &[String]) -> Result<CorrelationMatrix, EvalError> {
    let (n, d) = data.shape();
    if names.len() != d {
        return Err(EvalError::LengthMismatch {
            expected: d,
            found: names.len(),
        });
    }
    if n < 2 {
        return Err(EvalError::TooFewSamples {
            needed: 2,
            found: n,
        });
    }
    let means = data.column_means();
    let centered: Vec<Vec<f64>> = (0..d)
        .map(|j| data.rows().map(|r| r[j] - means[j]).collect())
        .collect();
    let norms: Vec<f64> = centered
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>())
        .collect();
    for (j, norm) in norms.iter().enumerate() {
        if *norm == 0.0 {
            log::warn!(
                "column {:?} is constant; its correlations are reported as 0",
                names[j]
            );
        }
    }
    let mut values = Matrix::identity(d);
    for a in 0..d {
        for b in a + 1..d {
            let r = if norms[a] == 0.0 || norms[b] == 0.0 {
                0.0
            } else {
                let cross: f64 = centered[a]
                    .iter()
                    .zip(&centered[b])
                    .map(|(x, y)| x * y)
                    .sum();
                (cross / (norms[a] * norms[b]).sqrt()).clamp(-1.0, 1.0)
            };
            values.set(a, b, r);
            values.set(b, a, r);
        }
    }
    Ok(CorrelationMatrix {
        names: names.to_vec(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub feature: String,
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `bin_lower,bin_upper,count` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lower,bin_upper,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", self.edges[i], self.edges[i + 1], c));
        }
        out
    }
}

/// Equal-width bins over `[min, max]`; a degenerate range is widened by ±0.5.
pub fn histogram(feature: &str, values: &[f64], n_bins: usize) -> Result<Histogram, EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if n_bins == 0 {
        return Err(EvalError::InvalidBins(
            "at least one bin is required".into(),
        ));
    }
    let (mut lo, mut hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
    if !lo.is_finite() || !hi.is_finite() {
        return Err(EvalError::InvalidBins("values must be finite".into()));
    }
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / n_bins as f64;
    let mut edges: Vec<f64> = (0..n_bins).map(|i| lo + width * i as f64).collect();
    edges.push(hi);
    histogram_with_edges(feature, values, &edges)
}

/// Bins `[e_i, e_{i+1})` with the last bin closed; values outside are ignored.
pub fn histogram_with_edges(
    feature: &str,
    values: &[f64],
    edges: &[f64],
) -> Result<Histogram, EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(EvalError::InvalidBins(
            "edges must be strictly increasing with at least two entries".into(),
        ));
    }
    let n_bins = edges.len() - 1;
    let last = edges[n_bins];
    let mut counts = vec![0; n_bins];
    for &v in values {
        if v < edges[0] || v > last || v.is_nan() {
            continue;
        }
        let bin = if v == last {
            n_bins - 1
        } else {
            edges.partition_point(|e| *e <= v) - 1
        };
        counts[bin] += 1;
    }
    Ok(Histogram {
        feature: feature.to_string(),
        edges: edges.to_vec(),
        counts,
    })
}
