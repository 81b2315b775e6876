use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::Regressor;
use crate::numeric::{child_seed, Matrix, RandomStream};

use super::tree::{tree_fit_rows, Tree, TreeParams};
use super::ForestError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Defaults to `⌈d/3⌉` when unset.
    pub features_per_split: Option<usize>,
    pub seed: u64,
    /// Draw each tree's training rows with replacement. Disabling it gives
    /// every tree the full training set, which is mainly useful in tests.
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: 10,
            min_samples_leaf: 5,
            features_per_split: None,
            seed: 0,
            bootstrap: true,
        }
    }
}

impl ForestConfig {
    pub fn tree_params(&self, n_features: usize) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            features_per_split: Some(
                self.features_per_split
                    .unwrap_or_else(|| n_features.div_ceil(3).max(1)),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub per_tree_seeds: Vec<u64>,
    /// Normalized impurity-decrease importances; all zero if no tree split.
    pub importances: Vec<f64>,
    pub feature_names: Vec<String>,
    pub config: ForestConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub feature: String,
    pub importance: f64,
}

impl Forest {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Self {
        assert_eq!(names.len(), self.importances.len());
        self.feature_names = names;
        self
    }

    /// Importances with names, sorted descending (stable on feature order).
    pub fn importance_table(&self) -> Vec<ImportanceRow> {
        let mut rows: Vec<ImportanceRow> = self
            .feature_names
            .iter()
            .zip(&self.importances)
            .map(|(f, i)| ImportanceRow {
                feature: f.clone(),
                importance: *i,
            })
            .collect();
        rows.sort_by(|a, b| b.importance.total_cmp(&a.importance));
        rows
    }
}

impl Regressor for Forest {
    fn input_dim(&self) -> usize {
        self.n_features()
    }

    fn predict_row_unchecked(&self, x: &[f64]) -> f64 {
        let mut sum = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for tree in &self.trees {
            let p = tree.predict_row_unchecked(x);
            sum += p;
            lo = lo.min(p);
            hi = hi.max(p);
        }
        (sum / self.trees.len() as f64).clamp(lo, hi)
    }
}

pub fn forest_fit(x: &Matrix, y: &[f64], config: &ForestConfig) -> Result<Forest, ForestError> {
    if config.n_trees == 0 {
        return Err(ForestError::InvalidConfig(
            "n_trees must be at least 1".into(),
        ));
    }
    let (n, d) = x.shape();
    if y.len() != n {
        return Err(ForestError::LengthMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if n < 2 {
        return Err(ForestError::TooFewSamples {
            needed: 2,
            found: n,
        });
    }
    let params = config.tree_params(d);
    params.check()?;

    let per_tree_seeds: Vec<u64> = (0..config.n_trees as u64)
        .map(|i| child_seed(config.seed, i))
        .collect();
    let trees = per_tree_seeds
        .par_iter()
        .map(|&seed| {
            let mut stream = RandomStream::new(seed);
            let rows: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| stream.next_below(n)).collect()
            } else {
                (0..n).collect()
            };
            tree_fit_rows(x, y, &rows, &params, &mut stream)
        })
        .collect::<Result<Vec<Tree>, ForestError>>()?;

    let mut importances = vec![0.0; d];
    for tree in &trees {
        for (acc, v) in importances.iter_mut().zip(tree.raw_importances()) {
            *acc += v;
        }
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        importances.iter_mut().for_each(|v| *v /= total);
    }
    log::debug!("trained {} trees on {n} rows", trees.len());

    Ok(Forest {
        trees,
        per_tree_seeds,
        importances,
        feature_names: (0..d).map(|j| format!("x{j}")).collect(),
        config: config.clone(),
    })
}

/// `feature,importance` CSV, sorted descending.
pub fn importances_csv(forest: &Forest) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["feature", "importance"])
        .expect("in-memory write");
    for row in forest.importance_table() {
        w.write_record([row.feature.as_str(), &row.importance.to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 names")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::tree_fit;
    use crate::linear::linear_fit;
    use crate::synth::friedman1;
    use proptest::prelude::*;

    fn noisy(n: usize, seed: u64) -> (Matrix, Vec<f64>) {
        let mut r = RandomStream::new(seed);
        let x = Matrix::from_vec(n, 4, (0..n * 4).map(|_| r.next_uniform()).collect()).unwrap();
        let y = x
            .rows()
            .map(|row| 3.0 * row[0] * row[1] + (row[2] * 5.0).cos() + 0.1 * r.next_normal())
            .collect();
        (x, y)
    }

    fn small_config(seed: u64) -> ForestConfig {
        ForestConfig {
            n_trees: 12,
            max_depth: 6,
            min_samples_leaf: 3,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn single_unbagged_tree_reduces_to_tree_fit() {
        let (x, y) = noisy(120, 1);
        let config = ForestConfig {
            n_trees: 1,
            bootstrap: false,
            ..small_config(5)
        };
        let forest = forest_fit(&x, &y, &config).unwrap();
        let mut stream = RandomStream::new(child_seed(5, 0));
        let tree = tree_fit(&x, &y, &config.tree_params(4), &mut stream).unwrap();
        assert_eq!(forest.trees[0], tree);
    }

    #[test]
    fn same_seed_same_bytes() {
        let (x, y) = noisy(150, 2);
        let a = serde_json::to_string(&forest_fit(&x, &y, &small_config(9)).unwrap()).unwrap();
        let b = serde_json::to_string(&forest_fit(&x, &y, &small_config(9)).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = serde_json::to_string(&forest_fit(&x, &y, &small_config(10)).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn importances_normalized() {
        let (x, y) = noisy(200, 3);
        let forest = forest_fit(&x, &y, &small_config(1)).unwrap();
        assert!(forest.importances.iter().all(|v| *v >= 0.0));
        assert!((forest.importances.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        // feature 3 never enters the target
        let table = forest.importance_table();
        assert_eq!(table.last().unwrap().feature, "x3");
        assert!(table.windows(2).all(|w| w[0].importance >= w[1].importance));
    }

    #[test]
    fn constant_target_gives_zero_importances() {
        let (x, _) = noisy(50, 4);
        let forest = forest_fit(&x, &[2.0; 50], &small_config(1)).unwrap();
        assert!(forest.importances.iter().all(|v| *v == 0.0));
        assert_eq!(forest.predict_row(&[0.1, 0.2, 0.3, 0.4]).unwrap(), 2.0);
    }

    #[test]
    fn tree_order_does_not_matter() {
        let (x, y) = noisy(100, 5);
        let forest = forest_fit(&x, &y, &small_config(2)).unwrap();
        let mut reversed = forest.clone();
        reversed.trees.reverse();
        for row in x.rows().take(20) {
            let a = forest.predict_row(row).unwrap();
            let b = reversed.predict_row(row).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn positive_scaling_keeps_tree_shapes() {
        let (x, y) = noisy(150, 6);
        let scales = [3.0, 0.25, 1000.0, 7.0];
        let mut scaled = x.clone();
        for i in 0..x.n_rows() {
            for (j, s) in scales.iter().enumerate() {
                scaled.set(i, j, x.get(i, j) * s);
            }
        }
        let a = forest_fit(&x, &y, &small_config(3)).unwrap();
        let b = forest_fit(&scaled, &y, &small_config(3)).unwrap();
        assert_eq!(a.importances, b.importances);
        for (ta, tb) in a.trees.iter().zip(&b.trees) {
            assert_eq!(ta.nodes.len(), tb.nodes.len());
            for (na, nb) in ta.nodes.iter().zip(&tb.nodes) {
                use crate::forest::TreeNode::*;
                match (na, nb) {
                    (
                        Internal {
                            feature: fa,
                            left: la,
                            ..
                        },
                        Internal {
                            feature: fb,
                            left: lb,
                            ..
                        },
                    ) => {
                        assert_eq!((fa, la), (fb, lb))
                    }
                    (Leaf { value: va, .. }, Leaf { value: vb, .. }) => assert_eq!(va, vb),
                    _ => panic!("tree shapes differ"),
                }
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let (x, y) = noisy(10, 7);
        assert!(forest_fit(
            &x,
            &y,
            &ForestConfig {
                n_trees: 0,
                ..Default::default()
            }
        )
        .is_err());
        assert!(forest_fit(&x, &y[..5], &ForestConfig::default()).is_err());
        let forest = forest_fit(&x, &y, &small_config(0)).unwrap();
        assert!(forest.predict_row(&[1.0]).is_err());
    }

    #[test]
    fn beats_linear_on_friedman() {
        let data = friedman1(2000, 1.0, 11);
        let (train, test) = (0..1400, 1400..2000);
        let x_train = data.x.select_rows(&train.clone().collect::<Vec<_>>());
        let x_test = data.x.select_rows(&test.clone().collect::<Vec<_>>());
        let (y_train, y_test) = (&data.y[train], &data.y[test]);
        let mse = |p: Vec<f64>| {
            p.iter()
                .zip(y_test)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / y_test.len() as f64
        };
        let forest = forest_fit(
            &x_train,
            y_train,
            &ForestConfig {
                seed: 11,
                ..Default::default()
            },
        )
        .unwrap();
        let linear = linear_fit(&x_train, y_train).unwrap();
        let forest_mse = mse(forest.predict(&x_test).unwrap());
        let linear_mse = mse(linear.predict(&x_test).unwrap());
        assert!(
            forest_mse < linear_mse,
            "forest {forest_mse} vs linear {linear_mse}"
        );
    }

    #[test]
    fn csv_table() {
        let (x, y) = noisy(80, 8);
        let forest = forest_fit(&x, &y, &small_config(1))
            .unwrap()
            .with_feature_names(vec!["a".into(), "b".into(), "c".into(), "d".into()]);
        let csv = importances_csv(&forest);
        assert!(csv.starts_with("feature,importance\n"));
        assert_eq!(csv.lines().count(), 5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn predictions_stay_within_training_range(
            seed in 0u64..1000,
            probe in proptest::collection::vec(-100.0f64..100.0, 4),
        ) {
            let (x, y) = noisy(60, seed);
            let forest = forest_fit(&x, &y, &ForestConfig { n_trees: 5, min_samples_leaf: 1, seed, ..Default::default() }).unwrap();
            let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let p = forest.predict_row(&probe).unwrap();
            prop_assert!(lo <= p && p <= hi);
        }
    }
}
