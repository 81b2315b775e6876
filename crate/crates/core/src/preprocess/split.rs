use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::numeric::RandomStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitIndices {
    /// Row indices in shuffled order.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub ratio: f64,
}

/// Shuffles `0..n_rows` with Fisher–Yates and takes the first
/// `floor(ratio·n_rows)` indices as the training set.
pub fn split(n_rows: usize, ratio: f64, seed: u64) -> Result<SplitIndices, PreprocessError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(PreprocessError::InvalidRatio(ratio));
    }
    if n_rows < 2 {
        return Err(PreprocessError::TooFewSamples {
            needed: 2,
            found: n_rows,
        });
    }
    // the epsilon absorbs products such as 0.29·100 = 28.999999999999996
    let n_train = (ratio * n_rows as f64 + 1e-9).floor() as usize;
    if n_train == 0 || n_train >= n_rows {
        return Err(PreprocessError::DegenerateSplit { n_rows, ratio });
    }
    let mut order: Vec<usize> = (0..n_rows).collect();
    RandomStream::new(seed).shuffle(&mut order);
    let test = order.split_off(n_train);
    Ok(SplitIndices {
        train: order,
        test,
        seed,
        ratio,
    })
}
