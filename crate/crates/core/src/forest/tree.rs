use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::Regressor;
use crate::numeric::{Matrix, RandomStream};

use super::ForestError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        impurity_decrease: f64,
        n_samples: usize,
    },
    Leaf {
        value: f64,
        n_samples: usize,
    },
}

/// Growth limits shared by a single tree and every tree of a forest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features sampled per node; `None` (or a value ≥ d) considers all.
    pub features_per_split: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 10,
            min_samples_leaf: 5,
            features_per_split: None,
        }
    }
}

impl TreeParams {
    pub(crate) fn check(&self) -> Result<(), ForestError> {
        if self.max_depth == 0 {
            return Err(ForestError::InvalidConfig(
                "max_depth must be at least 1".into(),
            ));
        }
        if self.min_samples_leaf == 0 {
            return Err(ForestError::InvalidConfig(
                "min_samples_leaf must be at least 1".into(),
            ));
        }
        if self.features_per_split == Some(0) {
            return Err(ForestError::InvalidConfig(
                "features_per_split must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Flat node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
    pub n_features: usize,
}

impl Tree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn depth(&self) -> usize {
        let mut deepest = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((node, depth)) = stack.pop() {
            deepest = deepest.max(depth);
            if let TreeNode::Internal { left, right, .. } = self.nodes[node] {
                stack.push((left, depth + 1));
                stack.push((right, depth + 1));
            }
        }
        deepest
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    /// Per-feature sum of impurity decrease over internal nodes.
    pub fn raw_importances(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_features];
        for node in &self.nodes {
            if let TreeNode::Internal {
                feature,
                impurity_decrease,
                ..
            } = node
            {
                acc[*feature] += impurity_decrease;
            }
        }
        acc
    }

    /// Graphviz rendering with feature names on the split nodes.
    pub fn to_dot(&self, feature_names: &[String]) -> String {
        let mut out = String::from("digraph tree {\n  node [shape=box];\n");
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    n_samples,
                    ..
                } => {
                    let name = feature_names
                        .get(*feature)
                        .cloned()
                        .unwrap_or_else(|| format!("x{feature}"));
                    let name = name.replace('"', "\\\"");
                    let _ = writeln!(
                        out,
                        "  n{i} [label=\"{name} <= {threshold}\\nsamples = {n_samples}\"];"
                    );
                    let _ = writeln!(out, "  n{i} -> n{left} [label=\"yes\"];");
                    let _ = writeln!(out, "  n{i} -> n{right} [label=\"no\"];");
                }
                TreeNode::Leaf { value, n_samples } => {
                    let _ = writeln!(out, "  n{i} [label=\"value = {value}\\nsamples = {n_samples}\", style=rounded];");
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

impl Regressor for Tree {
    fn input_dim(&self) -> usize {
        self.n_features
    }

    fn predict_row_unchecked(&self, x: &[f64]) -> f64 {
        let mut node = 0;
        loop {
            match self.nodes[node] {
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if x[feature] <= threshold { left } else { right };
                }
                TreeNode::Leaf { value, .. } => return value,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub impurity_decrease: f64,
}

/// Exhaustive scan of `candidates` (visited in ascending order) over the
/// midpoints between consecutive distinct values of the rows in `indices`.
///
/// Ties keep the earlier (lower feature, lower threshold) candidate. Returns
/// `None` when no admissible split reduces impurity.
pub fn best_split(
    x: &Matrix,
    y: &[f64],
    indices: &[usize],
    candidates: &[usize],
    min_samples_leaf: usize,
) -> Option<Split> {
    let n = indices.len();
    let min_leaf = min_samples_leaf.max(1);
    if n < 2 * min_leaf {
        return None;
    }
    let node_mean = indices.iter().map(|&i| y[i]).sum::<f64>() / n as f64;
    let centered_total: f64 = indices.iter().map(|&i| y[i] - node_mean).sum();
    let total_ss: f64 = indices.iter().map(|&i| (y[i] - node_mean).powi(2)).sum();
    if total_ss == 0.0 {
        return None;
    }
    let parent_term = centered_total * centered_total / n as f64;
    // reductions this small relative to the node's spread are rounding noise
    let floor = 1e-12 * total_ss;

    let mut sorted_candidates = candidates.to_vec();
    sorted_candidates.sort_unstable();
    sorted_candidates.dedup();

    let mut order = indices.to_vec();
    let mut best: Option<Split> = None;
    for &feature in &sorted_candidates {
        order.sort_by(|&a, &b| {
            x.get(a, feature)
                .total_cmp(&x.get(b, feature))
                .then(a.cmp(&b))
        });
        let mut left_sum = 0.0;
        for pos in 0..n - 1 {
            left_sum += y[order[pos]] - node_mean;
            let n_left = pos + 1;
            let n_right = n - n_left;
            if n_left < min_leaf {
                continue;
            }
            if n_right < min_leaf {
                break;
            }
            let lo = x.get(order[pos], feature);
            let hi = x.get(order[pos + 1], feature);
            if lo == hi {
                continue;
            }
            let right_sum = centered_total - left_sum;
            let reduction = left_sum * left_sum / n_left as f64
                + right_sum * right_sum / n_right as f64
                - parent_term;
            if reduction <= floor {
                continue;
            }
            if best.is_none_or(|b| reduction > b.impurity_decrease) {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(Split {
                    feature,
                    threshold,
                    impurity_decrease: reduction,
                });
            }
        }
    }
    best
}

fn leaf_for(y: &[f64], indices: &[usize]) -> TreeNode {
    let n = indices.len();
    let (lo, hi) = indices
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            (lo.min(y[i]), hi.max(y[i]))
        });
    let mean = indices.iter().map(|&i| y[i]).sum::<f64>() / n as f64;
    TreeNode::Leaf {
        value: mean.clamp(lo, hi),
        n_samples: n,
    }
}

/// Grows a tree on every row of `x`.
pub fn tree_fit(
    x: &Matrix,
    y: &[f64],
    params: &TreeParams,
    stream: &mut RandomStream,
) -> Result<Tree, ForestError> {
    let indices: Vec<usize> = (0..x.n_rows()).collect();
    tree_fit_rows(x, y, &indices, params, stream)
}

/// Grows a tree on the rows listed in `indices` (repeats allowed).
pub(crate) fn tree_fit_rows(
    x: &Matrix,
    y: &[f64],
    indices: &[usize],
    params: &TreeParams,
    stream: &mut RandomStream,
) -> Result<Tree, ForestError> {
    params.check()?;
    if y.len() != x.n_rows() {
        return Err(ForestError::LengthMismatch {
            expected: x.n_rows(),
            found: y.len(),
        });
    }
    if indices.is_empty() {
        return Err(ForestError::TooFewSamples {
            needed: 1,
            found: 0,
        });
    }
    let d = x.n_cols();
    let per_split = params.features_per_split.unwrap_or(d).min(d);

    let mut nodes = vec![TreeNode::Leaf {
        value: 0.0,
        n_samples: 0,
    }];
    let mut stack: Vec<(usize, Vec<usize>, usize)> = vec![(0, indices.to_vec(), 0)];
    while let Some((slot, rows, depth)) = stack.pop() {
        let split = if depth < params.max_depth && d > 0 {
            let candidates = if per_split < d {
                stream.sample_indices(d, per_split)
            } else {
                (0..d).collect()
            };
            best_split(x, y, &rows, &candidates, params.min_samples_leaf)
        } else {
            None
        };
        match split {
            None => nodes[slot] = leaf_for(y, &rows),
            Some(s) => {
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                    .iter()
                    .partition(|&&i| x.get(i, s.feature) <= s.threshold);
                let left = nodes.len();
                let right = left + 1;
                nodes.push(TreeNode::Leaf {
                    value: 0.0,
                    n_samples: 0,
                });
                nodes.push(TreeNode::Leaf {
                    value: 0.0,
                    n_samples: 0,
                });
                nodes[slot] = TreeNode::Internal {
                    feature: s.feature,
                    threshold: s.threshold,
                    left,
                    right,
                    impurity_decrease: s.impurity_decrease,
                    n_samples: rows.len(),
                };
                stack.push((right, right_rows, depth + 1));
                stack.push((left, left_rows, depth + 1));
            }
        }
    }
    Ok(Tree {
        nodes,
        n_features: d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step() -> (Matrix, Vec<f64>) {
        (
            Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]),
            vec![0.0, 0.0, 10.0, 10.0],
        )
    }

    fn brute_force_reduction(xs: &[f64], ys: &[f64], t: f64) -> f64 {
        let ss = |v: &[f64]| {
            if v.is_empty() {
                return 0.0;
            }
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|a| (a - m).powi(2)).sum::<f64>()
        };
        let left: Vec<f64> = xs
            .iter()
            .zip(ys)
            .filter(|(x, _)| **x <= t)
            .map(|(_, y)| *y)
            .collect();
        let right: Vec<f64> = xs
            .iter()
            .zip(ys)
            .filter(|(x, _)| **x > t)
            .map(|(_, y)| *y)
            .collect();
        ss(ys) - ss(&left) - ss(&right)
    }

    #[test]
    fn step_fixture_splits_in_the_middle() {
        let (x, y) = step();
        let s = best_split(&x, &y, &[0, 1, 2, 3], &[0], 1).unwrap();
        assert_eq!(s.feature, 0);
        assert_eq!(s.threshold, 1.5);
        let best_brute = [0.5, 1.5, 2.5]
            .iter()
            .map(|&t| brute_force_reduction(&[0.0, 1.0, 2.0, 3.0], &y, t))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((s.impurity_decrease - best_brute).abs() < 1e-12);
        assert!((s.impurity_decrease - 100.0).abs() < 1e-12);
    }

    #[test]
    fn constant_target_has_no_split() {
        let (x, _) = step();
        assert!(best_split(&x, &[4.0; 4], &[0, 1, 2, 3], &[0], 1).is_none());
    }

    #[test]
    fn only_informative_feature_is_chosen() {
        let x = Matrix::from_rows(&[[5.0, 0.0], [5.0, 1.0], [5.0, 2.0], [5.0, 3.0]]);
        let s = best_split(&x, &[0.0, 0.0, 1.0, 1.0], &[0, 1, 2, 3], &[0, 1], 1).unwrap();
        assert_eq!(s.feature, 1);
        assert_eq!(s.threshold, 1.5);
    }

    #[test]
    fn ties_prefer_lower_feature_then_lower_threshold() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]);
        let s = best_split(&x, &[0.0, 0.0, 10.0, 10.0], &[0, 1, 2, 3], &[1, 0], 1).unwrap();
        assert_eq!(s.feature, 0);
        // symmetric targets: thresholds 0.5 and 2.5 tie, the lower one wins
        let s = best_split(&x, &[0.0, 5.0, 5.0, 10.0], &[0, 1, 2, 3], &[0], 1).unwrap();
        assert_eq!(s.threshold, 0.5);
    }

    #[test]
    fn min_samples_leaf_respected() {
        let (x, y) = step();
        assert!(best_split(&x, &y, &[0, 1, 2, 3], &[0], 3).is_none());
        let s = best_split(&x, &[0.0, 10.0, 10.0, 10.0], &[0, 1, 2, 3], &[0], 2).unwrap();
        assert_eq!(s.threshold, 1.5);
    }

    #[test]
    fn stump_on_step_fixture() {
        let (x, y) = step();
        let params = TreeParams {
            max_depth: 1,
            min_samples_leaf: 1,
            features_per_split: None,
        };
        let tree = tree_fit(&x, &y, &params, &mut RandomStream::new(0)).unwrap();
        assert_eq!(tree.nodes.len(), 3);
        assert_eq!(tree.predict_row(&[0.0]).unwrap(), 0.0);
        assert_eq!(tree.predict_row(&[3.0]).unwrap(), 10.0);
    }

    #[test]
    fn single_row_is_a_leaf() {
        let x = Matrix::from_rows(&[[1.0, 2.0]]);
        let tree = tree_fit(
            &x,
            &[7.5],
            &TreeParams::default(),
            &mut RandomStream::new(0),
        )
        .unwrap();
        assert_eq!(
            tree.root(),
            &TreeNode::Leaf {
                value: 7.5,
                n_samples: 1
            }
        );
    }

    #[test]
    fn fully_grown_tree_memorizes() {
        let mut r = RandomStream::new(4);
        let rows: Vec<[f64; 2]> = (0..20).map(|i| [i as f64, r.next_normal()]).collect();
        let x = Matrix::from_rows(&rows);
        let y: Vec<f64> = (0..20).map(|_| r.next_normal()).collect();
        let params = TreeParams {
            max_depth: usize::MAX,
            min_samples_leaf: 1,
            features_per_split: None,
        };
        let tree = tree_fit(&x, &y, &params, &mut RandomStream::new(1)).unwrap();
        for (row, target) in x.rows().zip(&y) {
            assert_eq!(tree.predict_row(row).unwrap(), *target);
        }
    }

    #[test]
    fn depth_and_decreases_bounded() {
        let mut r = RandomStream::new(9);
        let x = Matrix::from_vec(300, 3, (0..900).map(|_| r.next_uniform()).collect()).unwrap();
        let y: Vec<f64> = x.rows().map(|row| (row[0] * 6.0).sin() + row[1]).collect();
        let params = TreeParams {
            max_depth: 4,
            min_samples_leaf: 5,
            features_per_split: Some(2),
        };
        let tree = tree_fit(&x, &y, &params, &mut RandomStream::new(2)).unwrap();
        assert!(tree.depth() <= 4);
        for node in &tree.nodes {
            match node {
                TreeNode::Internal {
                    impurity_decrease, ..
                } => assert!(*impurity_decrease > 0.0),
                TreeNode::Leaf { value, n_samples } => {
                    assert!(value.is_finite());
                    assert!(*n_samples >= 5);
                }
            }
        }
    }

    #[test]
    fn invalid_params() {
        let (x, y) = step();
        let params = TreeParams {
            max_depth: 0,
            ..Default::default()
        };
        assert!(matches!(
            tree_fit(&x, &y, &params, &mut RandomStream::new(0)),
            Err(ForestError::InvalidConfig(_))
        ));
    }

    #[test]
    fn dot_output_names_features() {
        let (x, y) = step();
        let params = TreeParams {
            max_depth: 1,
            min_samples_leaf: 1,
            features_per_split: None,
        };
        let tree = tree_fit(&x, &y, &params, &mut RandomStream::new(0)).unwrap();
        let dot = tree.to_dot(&["void_fraction".to_string()]);
        assert!(dot.starts_with("digraph tree {"));
        assert!(dot.contains("void_fraction <= 1.5"));
        assert!(dot.contains("n0 -> n1"));
    }
}
