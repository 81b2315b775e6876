use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::evaluate::{ComparisonRun, Metrics, TrainedModel};
use crate::forest::{Forest, TreeNode};
use crate::ingest::{CleanTable, Codebook, FeatureKind};
use crate::linear::{LassoModel, LinearModel};
use crate::model::Regressor;
use crate::neuralnet::{Activation, Network};
use crate::numeric::Matrix;
use crate::preprocess::{PcaModel, Scaler};

use super::ArtifactError;

pub const SCHEMA_VERSION: u64 = 1;
pub const BUNDLE_EXTENSION: &str = ".mofml.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Lasso,
    Forest,
    NeuralNet,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Lasso => "lasso",
            ModelKind::Forest => "forest",
            ModelKind::NeuralNet => "neural_net",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Linear(LinearModel),
    Lasso(LassoModel),
    Forest(Forest),
    NeuralNet(Network),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Linear(_) => ModelKind::Linear,
            ModelParams::Lasso(_) => ModelKind::Lasso,
            ModelParams::Forest(_) => ModelKind::Forest,
            ModelParams::NeuralNet(_) => ModelKind::NeuralNet,
        }
    }

    pub fn regressor(&self) -> &dyn Regressor {
        match self {
            ModelParams::Linear(m) => m,
            ModelParams::Lasso(m) => m,
            ModelParams::Forest(m) => m,
            ModelParams::NeuralNet(m) => m,
        }
    }
}

/// One raw model input with the range observed on the training rows.
/// For categorical features the range is over codes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub name: String,
    pub kind: FeatureKind,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMetadata {
    pub seed: u64,
    /// RFC 3339 timestamp; absent unless stamping was requested, so that
    /// identical runs produce identical files.
    pub created_at: Option<String>,
    /// `sha256:` digest of the cleaned design matrix and target.
    pub dataset_fingerprint: String,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub hyperparameters: String,
    pub train_metrics: Option<Metrics>,
    pub test_metrics: Option<Metrics>,
    /// Configuration that produced the bundle.
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub schema_version: u64,
    pub kind: ModelKind,
    pub model_name: String,
    pub features: Vec<FeatureSchema>,
    pub codebooks: Vec<Codebook>,
    pub name_column: Option<String>,
    pub scaler: Scaler,
    pub target_scaler: Option<Scaler>,
    pub pca: Option<PcaModel>,
    pub params: ModelParams,
    pub metadata: BundleMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub model: String,
    /// `impurity_decrease` (forest) or `coefficient` (linear models).
    pub measure: String,
    pub entries: Vec<ImportanceEntry>,
}

fn check_matrix(m: &Matrix, what: &str) -> Result<(), ArtifactError> {
    let (r, c) = m.shape();
    if m.data().len() != r * c {
        return Err(ArtifactError::CorruptBundle(format!(
            "{what}: {r}x{c} matrix holds {} values",
            m.data().len()
        )));
    }
    if m.data().iter().any(|v| !v.is_finite()) {
        return Err(ArtifactError::CorruptBundle(format!(
            "{what}: non-finite value"
        )));
    }
    Ok(())
}

fn corrupt(msg: impl Into<String>) -> ArtifactError {
    ArtifactError::CorruptBundle(msg.into())
}

impl ModelBundle {
    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn codebook(&self, feature: &str) -> Option<&Codebook> {
        self.codebooks.iter().find(|c| c.column == feature)
    }

    /// Structural consistency checks run on every load.
    pub fn validate(&self) -> Result<(), ArtifactError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ArtifactError::SchemaVersionMismatch {
                found: self.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        if self.kind != self.params.kind() {
            return Err(corrupt("kind does not match the parameter block"));
        }
        let d = self.features.len();
        if d == 0 {
            return Err(corrupt("no features"));
        }
        if self.scaler.means.len() != d || self.scaler.stds.len() != d {
            return Err(corrupt("scaler width does not match the feature list"));
        }
        if self
            .scaler
            .stds
            .iter()
            .any(|s| !(*s > 0.0) || !s.is_finite())
        {
            return Err(corrupt("scaler has a non-positive standard deviation"));
        }
        if let Some(ts) = &self.target_scaler {
            if ts.means.len() != 1 || ts.stds.len() != 1 || !(ts.stds[0] > 0.0) {
                return Err(corrupt(
                    "target scaler must describe exactly one positive-scale column",
                ));
            }
        }
        for f in &self.features {
            if f.kind == FeatureKind::Categorical && self.codebook(&f.name).is_none() {
                return Err(corrupt(format!(
                    "categorical feature {:?} has no codebook",
                    f.name
                )));
            }
        }
        for cb in &self.codebooks {
            if !cb.is_well_formed() {
                return Err(corrupt(format!(
                    "codebook {:?} is not sorted and distinct",
                    cb.column
                )));
            }
        }
        let model_input = match &self.pca {
            Some(p) => {
                check_matrix(&p.components, "pca components")?;
                if p.input_dim() != d || p.mean.len() != d {
                    return Err(corrupt("pca input width does not match the feature list"));
                }
                p.n_components()
            }
            None => d,
        };
        let regressor_dim = self.params.regressor().input_dim();
        if regressor_dim != model_input {
            return Err(corrupt(format!(
                "model expects {regressor_dim} inputs but receives {model_input}"
            )));
        }
        match &self.params {
            ModelParams::Linear(m) => {
                if m.weights
                    .iter()
                    .chain([&m.intercept])
                    .any(|v| !v.is_finite())
                {
                    return Err(corrupt("non-finite linear weight"));
                }
            }
            ModelParams::Lasso(m) => {
                if m.weights
                    .iter()
                    .chain([&m.intercept])
                    .any(|v| !v.is_finite())
                {
                    return Err(corrupt("non-finite lasso weight"));
                }
            }
            ModelParams::Forest(f) => {
                if f.trees.is_empty() {
                    return Err(corrupt("forest has no trees"));
                }
                if f.importances.len() != model_input || f.feature_names.len() != model_input {
                    return Err(corrupt("forest importance width mismatch"));
                }
                for tree in &f.trees {
                    if tree.n_features != model_input || tree.nodes.is_empty() {
                        return Err(corrupt("tree width mismatch or empty tree"));
                    }
                    check_tree(&tree.nodes, model_input)?;
                }
            }
            ModelParams::NeuralNet(net) => {
                let mut width = net.input_dim;
                for (i, layer) in net.layers.iter().enumerate() {
                    check_matrix(&layer.weights, "network weights")?;
                    if layer.weights.n_cols() != width
                        || layer.biases.len() != layer.weights.n_rows()
                    {
                        return Err(corrupt(format!("layer {i} dimensions do not chain")));
                    }
                    width = layer.weights.n_rows();
                }
                let last = net
                    .layers
                    .last()
                    .ok_or_else(|| corrupt("network has no layers"))?;
                if width != 1 || last.activation != Activation::Linear {
                    return Err(corrupt("network output must be a single linear unit"));
                }
                if !net.is_finite() {
                    return Err(corrupt("non-finite network parameter"));
                }
            }
        }
        Ok(())
    }

    /// Forest importances or linear coefficients by original feature name.
    /// Not available for models fitted on principal components or for networks.
    pub fn importance(&self) -> Option<ImportanceReport> {
        if self.pca.is_some() {
            return None;
        }
        let names = &self.metadata.feature_names;
        let (measure, mut entries): (&str, Vec<ImportanceEntry>) = match &self.params {
            ModelParams::Forest(f) => (
                "impurity_decrease",
                names
                    .iter()
                    .zip(&f.importances)
                    .map(|(n, v)| ImportanceEntry {
                        feature: n.clone(),
                        value: *v,
                    })
                    .collect(),
            ),
            ModelParams::Lasso(m) => (
                "coefficient",
                names
                    .iter()
                    .zip(&m.weights)
                    .map(|(n, v)| ImportanceEntry {
                        feature: n.clone(),
                        value: *v,
                    })
                    .collect(),
            ),
            ModelParams::Linear(m) => (
                "coefficient",
                names
                    .iter()
                    .zip(&m.weights)
                    .map(|(n, v)| ImportanceEntry {
                        feature: n.clone(),
                        value: *v,
                    })
                    .collect(),
            ),
            ModelParams::NeuralNet(_) => return None,
        };
        entries.sort_by(|a, b| b.value.abs().total_cmp(&a.value.abs()));
        Some(ImportanceReport {
            model: self.model_name.clone(),
            measure: measure.into(),
            entries,
        })
    }
}

fn check_tree(nodes: &[TreeNode], width: usize) -> Result<(), ArtifactError> {
    let n = nodes.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    while let Some(i) = stack.pop() {
        if seen[i] {
            return Err(corrupt("tree node reached twice"));
        }
        seen[i] = true;
        match nodes[i] {
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                if feature >= width
                    || !threshold.is_finite()
                    || left >= n
                    || right >= n
                    || left <= i
                    || right <= i
                {
                    return Err(corrupt(format!("tree node {i} is malformed")));
                }
                stack.push(left);
                stack.push(right);
            }
            TreeNode::Leaf { value, .. } => {
                if !value.is_finite() {
                    return Err(corrupt(format!("tree leaf {i} is not finite")));
                }
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(corrupt("tree has unreachable nodes"));
    }
    Ok(())
}

/// `sha256:` digest over the shape and little-endian bytes of `x` and `y`.
pub fn dataset_fingerprint(x: &Matrix, y: &[f64]) -> String {
    let mut h = Sha256::new();
    h.update((x.n_rows() as u64).to_le_bytes());
    h.update((x.n_cols() as u64).to_le_bytes());
    for v in x.data() {
        h.update(v.to_le_bytes());
    }
    for v in y {
        h.update(v.to_le_bytes());
    }
    format!("sha256:{}", hex::encode(h.finalize()))
}

/// Packages every successful model of a comparison run, in row order.
pub fn bundles_from_run(
    table: &CleanTable,
    run: &ComparisonRun,
    config_echo: &serde_json::Value,
    created_at: Option<&str>,
) -> Vec<ModelBundle> {
    let d = table.n_features();
    let features: Vec<FeatureSchema> = (0..d)
        .map(|j| {
            let (min, max) = run
                .split
                .train
                .iter()
                .map(|&i| table.x.get(i, j))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            FeatureSchema {
                name: table.feature_names[j].clone(),
                kind: table.feature_kinds[j],
                min,
                max,
            }
        })
        .collect();
    let fingerprint = dataset_fingerprint(&table.x, &table.y);

    let mut bundles = Vec::new();
    for ((row, model), config) in run.report.rows.iter().zip(&run.models).zip(&run.configs) {
        let Some(model) = model else { continue };
        let names = table.feature_names.clone();
        let (params, pca, target_scaler) = match model {
            TrainedModel::Linear(m) => (
                ModelParams::Linear(m.clone().with_feature_names(names.clone())),
                None,
                None,
            ),
            TrainedModel::LinearPca { pca, model } => {
                let components = (1..=pca.n_components()).map(|k| format!("pc{k}")).collect();
                (
                    ModelParams::Linear(model.clone().with_feature_names(components)),
                    Some(pca.clone()),
                    None,
                )
            }
            TrainedModel::Lasso { model, .. } => (
                ModelParams::Lasso(model.clone().with_feature_names(names.clone())),
                None,
                None,
            ),
            TrainedModel::Forest(f) => (
                ModelParams::Forest(f.clone().with_feature_names(names.clone())),
                None,
                None,
            ),
            TrainedModel::NeuralNet { net, .. } => (
                ModelParams::NeuralNet(net.clone()),
                None,
                Some(run.target_scaler.clone()),
            ),
        };
        let echo = serde_json::json!({
            "model": config,
            "run": config_echo,
        });
        bundles.push(ModelBundle {
            schema_version: SCHEMA_VERSION,
            kind: params.kind(),
            model_name: row.model.clone(),
            features: features.clone(),
            codebooks: table.codebooks.clone(),
            name_column: table.name_column.clone(),
            scaler: run.scaler.clone(),
            target_scaler,
            pca,
            params,
            metadata: BundleMetadata {
                seed: run.report.seed,
                created_at: created_at.map(str::to_string),
                dataset_fingerprint: fingerprint.clone(),
                feature_names: names,
                target_name: table.target_name.clone(),
                hyperparameters: row.hyperparameters.clone(),
                train_metrics: row.train,
                test_metrics: row.test,
                config: echo,
            },
        });
    }
    bundles
}
