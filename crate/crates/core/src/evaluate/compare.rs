use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::forest::{forest_fit, Forest, ForestConfig};
use crate::ingest::CleanTable;
use crate::linear::{
    check_grid, default_lambda_grid, lasso_fit_from, linear_fit, LassoModel, LassoOptions,
    LinearError, LinearModel,
};
use crate::model::Regressor;
use crate::neuralnet::{nn_init, nn_train, EpochLoss, LayerSpec, Network, Optimizer, TrainConfig};
use crate::numeric::{child_seed, Matrix, RandomStream};
use crate::preprocess::{fit_scaler, pca_fit, split, PcaModel, PcaTarget, Scaler, SplitIndices};

use super::metrics::{compute_metrics, Metrics};
use super::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaModelConfig {
    /// Keep the fewest components whose cumulative explained ratio reaches this.
    pub threshold: f64,
}

impl Default for PcaModelConfig {
    fn default() -> Self {
        PcaModelConfig { threshold: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LassoModelConfig {
    /// Explicit descending grid; when unset a log-spaced grid from λ_max is used.
    pub lambdas: Option<Vec<f64>>,
    pub n_lambdas: usize,
    pub min_ratio: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for LassoModelConfig {
    fn default() -> Self {
        LassoModelConfig {
            lambdas: None,
            n_lambdas: 30,
            min_ratio: 1e-3,
            max_iters: 10_000,
            tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NnModelConfig {
    pub hidden_layers: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub shuffle_each_epoch: bool,
}

impl Default for NnModelConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        NnModelConfig {
            hidden_layers: vec![64, 32],
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            optimizer: t.optimizer,
            shuffle_each_epoch: t.shuffle_each_epoch,
        }
    }
}

impl NnModelConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            seed,
            shuffle_each_epoch: self.shuffle_each_epoch,
        }
    }
}

/// One model to train in a comparison. Random seeds inside these configs are
/// replaced by seeds derived from the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Linear,
    LinearPca(PcaModelConfig),
    Lasso(LassoModelConfig),
    Forest(ForestConfig),
    NeuralNet(NnModelConfig),
}

impl ModelConfig {
    pub const KINDS: [&'static str; 5] = ["linear", "linear_pca", "lasso", "forest", "neural_net"];

    pub fn name(&self) -> &'static str {
        Self::KINDS[self.kind_index()]
    }

    fn kind_index(&self) -> usize {
        match self {
            ModelConfig::Linear => 0,
            ModelConfig::LinearPca(_) => 1,
            ModelConfig::Lasso(_) => 2,
            ModelConfig::Forest(_) => 3,
            ModelConfig::NeuralNet(_) => 4,
        }
    }

    pub fn default_for(kind: &str) -> Option<ModelConfig> {
        Some(match kind {
            "linear" => ModelConfig::Linear,
            "linear_pca" => ModelConfig::LinearPca(PcaModelConfig::default()),
            "lasso" => ModelConfig::Lasso(LassoModelConfig::default()),
            "forest" => ModelConfig::Forest(ForestConfig::default()),
            "neural_net" => ModelConfig::NeuralNet(NnModelConfig::default()),
            _ => return None,
        })
    }

    pub fn all_defaults() -> Vec<ModelConfig> {
        Self::KINDS
            .iter()
            .map(|k| Self::default_for(k).expect("known kind"))
            .collect()
    }

    /// Seed for this model kind; independent of which other kinds are run.
    pub fn derived_seed(&self, run_seed: u64) -> u64 {
        child_seed(run_seed, 1 + self.kind_index() as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareOptions {
    pub ratio: f64,
    pub seed: u64,
    /// Standardize on every row before splitting instead of on the training rows only.
    pub paper_order: bool,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            ratio: 0.7,
            seed: 0,
            paper_order: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Linear(LinearModel),
    LinearPca {
        pca: PcaModel,
        model: LinearModel,
    },
    Lasso {
        model: LassoModel,
        path: Vec<LassoPathPoint>,
    },
    Forest(Forest),
    /// Trained on the standardized target.
    NeuralNet {
        net: Network,
        history: Vec<EpochLoss>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoPathPoint {
    pub lambda: f64,
    pub nonzero: usize,
    pub test_mse: f64,
}

/// Warm-started path that stops at the first lambda whose fit does not
/// converge; smaller lambdas are harder still. Fails only if none converge.
fn lasso_path_until_stall(
    x: &Matrix,
    y: &[f64],
    grid: &[f64],
    opts: &LassoOptions,
) -> Result<Vec<LassoModel>, String> {
    check_grid(grid).map_err(|e| e.to_string())?;
    let mut path: Vec<LassoModel> = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let start = path.last().map(|m| (m.weights.as_slice(), m.intercept));
        match lasso_fit_from(x, y, lambda, opts, start) {
            Ok(m) => path.push(m),
            Err(e @ LinearError::NoConvergence { .. }) if !path.is_empty() => {
                log::warn!("lasso path stopped at lambda={lambda}: {e}");
                break;
            }
            Err(e) => return Err(e.to_string()),
        }
    }
    Ok(path)
}

impl TrainedModel {
    /// Predictions in the units the model was trained on.
    fn predict(&self, x_std: &Matrix) -> Vec<f64> {
        let out = match self {
            TrainedModel::Linear(m) => m.predict(x_std),
            TrainedModel::LinearPca { pca, model } => {
                model.predict(&pca.transform(x_std).expect("fitted on the same width"))
            }
            TrainedModel::Lasso { model, .. } => model.predict(x_std),
            TrainedModel::Forest(f) => f.predict(x_std),
            TrainedModel::NeuralNet { net, .. } => net.predict(x_std),
        };
        out.expect("fitted on the same width")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub hyperparameters: String,
    pub train: Option<Metrics>,
    pub test: Option<Metrics>,
    pub wall_time_seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    /// Successful row with the lowest test MSE (earliest on ties).
    pub best_model: Option<String>,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub paper_order: bool,
}

impl ComparisonReport {
    pub fn row(&self, model: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.model == model)
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}

/// Everything needed to package the trained models afterwards.
#[derive(Debug, Clone)]
pub struct ComparisonRun {
    pub report: ComparisonReport,
    /// Aligned with `report.rows`; `None` for failed rows.
    pub models: Vec<Option<TrainedModel>>,
    pub configs: Vec<ModelConfig>,
    pub split: SplitIndices,
    pub scaler: Scaler,
    pub target_scaler: Scaler,
}

struct Prepared {
    x_train: Matrix,
    x_test: Matrix,
    y_train: Vec<f64>,
    y_test: Vec<f64>,
    target_scaler: Scaler,
}

fn fit_one(
    config: &ModelConfig,
    data: &Prepared,
    run_seed: u64,
) -> Result<(TrainedModel, String), String> {
    let seed = config.derived_seed(run_seed);
    match config {
        ModelConfig::Linear => {
            let m = linear_fit(&data.x_train, &data.y_train).map_err(|e| e.to_string())?;
            Ok((TrainedModel::Linear(m), "ols".into()))
        }
        ModelConfig::LinearPca(c) => {
            let pca = pca_fit(&data.x_train, PcaTarget::VarianceThreshold(c.threshold))
                .map_err(|e| e.to_string())?;
            let z = pca.transform(&data.x_train).map_err(|e| e.to_string())?;
            let model = linear_fit(&z, &data.y_train).map_err(|e| e.to_string())?;
            let summary = format!(
                "components={} threshold={}",
                pca.n_components(),
                c.threshold
            );
            Ok((TrainedModel::LinearPca { pca, model }, summary))
        }
        ModelConfig::Lasso(c) => {
            let grid = match &c.lambdas {
                Some(l) => l.clone(),
                None => default_lambda_grid(&data.x_train, &data.y_train, c.n_lambdas, c.min_ratio),
            };
            let opts = LassoOptions {
                max_iters: c.max_iters,
                tol: c.tol,
                ..Default::default()
            };
            let path = lasso_path_until_stall(&data.x_train, &data.y_train, &grid, &opts)?;
            let points: Vec<LassoPathPoint> = path
                .iter()
                .map(|m| {
                    let p = m.predict(&data.x_test).expect("same width");
                    let mse = p
                        .iter()
                        .zip(&data.y_test)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        / data.y_test.len() as f64;
                    LassoPathPoint {
                        lambda: m.lambda,
                        nonzero: m.support().len(),
                        test_mse: mse,
                    }
                })
                .collect();
            let best = (0..points.len())
                .min_by(|&a, &b| points[a].test_mse.total_cmp(&points[b].test_mse))
                .expect("nonempty grid");
            let model = path.into_iter().nth(best).expect("index in range");
            let summary = format!(
                "lambda={} nonzero={} grid={}/{}",
                model.lambda,
                points[best].nonzero,
                points.len(),
                grid.len()
            );
            Ok((
                TrainedModel::Lasso {
                    model,
                    path: points,
                },
                summary,
            ))
        }
        ModelConfig::Forest(c) => {
            let cfg = ForestConfig { seed, ..c.clone() };
            let f = forest_fit(&data.x_train, &data.y_train, &cfg).map_err(|e| e.to_string())?;
            let summary = format!(
                "n_trees={} max_depth={} min_samples_leaf={} features_per_split={}",
                cfg.n_trees,
                cfg.max_depth,
                cfg.min_samples_leaf,
                cfg.tree_params(data.x_train.n_cols())
                    .features_per_split
                    .unwrap_or(0)
            );
            Ok((TrainedModel::Forest(f), summary))
        }
        ModelConfig::NeuralNet(c) => {
            let specs = LayerSpec::stack(&c.hidden_layers);
            let mut init_stream = RandomStream::new(child_seed(seed, 0));
            let net = nn_init(data.x_train.n_cols(), &specs, &mut init_stream)
                .map_err(|e| e.to_string())?;
            let ts = &data.target_scaler;
            let y_train: Vec<f64> = data.y_train.iter().map(|v| ts.apply_scalar(*v)).collect();
            let y_test: Vec<f64> = data.y_test.iter().map(|v| ts.apply_scalar(*v)).collect();
            let train = c.train_config(child_seed(seed, 1));
            let (net, history) = nn_train(
                &net,
                &data.x_train,
                &y_train,
                Some((&data.x_test, &y_test)),
                &train,
            )
            .map_err(|e| e.to_string())?;
            let widths: Vec<String> = c.hidden_layers.iter().map(|w| w.to_string()).collect();
            let optimizer = match c.optimizer {
                Optimizer::Sgd => "sgd",
                Optimizer::Adam { .. } => "adam",
            };
            let summary = format!(
                "hidden=[{}] epochs={} batch={} lr={} optimizer={}",
                widths.join(" "),
                c.epochs,
                c.batch_size,
                c.learning_rate,
                optimizer
            );
            Ok((TrainedModel::NeuralNet { net, history }, summary))
        }
    }
}

/// Trains every configured model on one shared split and scaler.
///
/// A model that fails is reported in its row and the others still run.
pub fn compare_models(
    table: &CleanTable,
    configs: &[ModelConfig],
    options: &CompareOptions,
) -> Result<ComparisonRun, EvalError> {
    if configs.is_empty() {
        return Err(EvalError::NoModels);
    }
    let split = split(table.n_rows(), options.ratio, options.seed)?;
    let (x_train_raw, x_test_raw) = (
        table.x.select_rows(&split.train),
        table.x.select_rows(&split.test),
    );
    let y_train: Vec<f64> = split.train.iter().map(|&i| table.y[i]).collect();
    let y_test: Vec<f64> = split.test.iter().map(|&i| table.y[i]).collect();

    let (scaler, target_scaler) = if options.paper_order {
        (
            fit_scaler(&table.x)?,
            fit_scaler(&Matrix::column_vector(&table.y))?,
        )
    } else {
        (
            fit_scaler(&x_train_raw)?,
            fit_scaler(&Matrix::column_vector(&y_train))?,
        )
    };
    let data = Prepared {
        x_train: scaler.apply(&x_train_raw)?,
        x_test: scaler.apply(&x_test_raw)?,
        y_train,
        y_test,
        target_scaler,
    };

    let mut rows = Vec::with_capacity(configs.len());
    let mut models = Vec::with_capacity(configs.len());
    for (i, config) in configs.iter().enumerate() {
        let base = config.name();
        let earlier = configs[..i].iter().filter(|c| c.name() == base).count();
        let name = if earlier == 0 {
            base.to_string()
        } else {
            format!("{base}_#{}", earlier + 1)
        };

        let started = Instant::now();
        let fitted = fit_one(config, &data, options.seed);
        let wall_time_seconds = started.elapsed().as_secs_f64();
        match fitted {
            Ok((model, hyperparameters)) => {
                let unscale = |p: Vec<f64>| -> Vec<f64> {
                    if matches!(model, TrainedModel::NeuralNet { .. }) {
                        p.into_iter()
                            .map(|v| data.target_scaler.invert_scalar(v))
                            .collect()
                    } else {
                        p
                    }
                };
                let train = compute_metrics(&data.y_train, &unscale(model.predict(&data.x_train)))?;
                let test = compute_metrics(&data.y_test, &unscale(model.predict(&data.x_test)))?;
                log::info!("{name}: test mse {} ({wall_time_seconds:.2} s)", test.mse);
                rows.push(ComparisonRow {
                    model: name,
                    hyperparameters,
                    train: Some(train),
                    test: Some(test),
                    wall_time_seconds,
                    error: None,
                });
                models.push(Some(model));
            }
            Err(message) => {
                log::warn!("{name} failed: {message}");
                rows.push(ComparisonRow {
                    model: name,
                    hyperparameters: String::new(),
                    train: None,
                    test: None,
                    wall_time_seconds,
                    error: Some(message),
                });
                models.push(None);
            }
        }
    }

    let best_model = rows
        .iter()
        .filter_map(|r| r.test.map(|t| (r, t.mse)))
        .fold(None::<(&ComparisonRow, f64)>, |best, (r, mse)| match best {
            Some((_, b)) if b <= mse => best,
            _ => Some((r, mse)),
        })
        .map(|(r, _)| r.model.clone());

    Ok(ComparisonRun {
        report: ComparisonReport {
            rows,
            best_model,
            n_train: split.train.len(),
            n_test: split.test.len(),
            seed: options.seed,
            paper_order: options.paper_order,
        },
        models,
        configs: configs.to_vec(),
        split,
        scaler,
        target_scaler: data.target_scaler,
    })
}
