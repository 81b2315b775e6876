use serde::{Deserialize, Serialize};

use crate::model::DimensionMismatch;
use crate::numeric::{Matrix, RandomStream};

use super::network::{nn_backward, nn_forward, Network};
use super::NnError;

/// Parameter update rule.
///
/// * `sgd`: `θ ← θ − η·g`
/// * `adam`: `m ← β₁m + (1−β₁)g`, `v ← β₂v + (1−β₂)g²`,
///   `θ ← θ − η·m̂/(√v̂ + ε)` with `m̂ = m/(1−β₁ᵗ)`, `v̂ = v/(1−β₂ᵗ)` and `t` the step count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::adam()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub shuffle_each_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 256,
            learning_rate: 1e-3,
            optimizer: Optimizer::adam(),
            seed: 0,
            shuffle_each_epoch: true,
        }
    }
}

impl TrainConfig {
    fn check(&self) -> Result<(), NnError> {
        if self.epochs == 0 {
            return Err(NnError::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(NnError::InvalidConfig(
                "batch_size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(NnError::InvalidConfig(
                "learning_rate must be positive and finite".into(),
            ));
        }
        if let Optimizer::Adam {
            beta1,
            beta2,
            epsilon,
        } = self.optimizer
        {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(epsilon > 0.0) {
                return Err(NnError::InvalidConfig(
                    "adam needs betas in [0, 1) and epsilon > 0".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
}

fn dataset_mse(net: &Network, x: &Matrix, y: &[f64]) -> Result<f64, NnError> {
    let (p, _) = nn_forward(net, x)?;
    Ok(p.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64)
}

fn check_xy(net: &Network, x: &Matrix, y: &[f64]) -> Result<(), NnError> {
    if x.n_cols() != net.input_dim {
        return Err(DimensionMismatch {
            expected: net.input_dim,
            found: x.n_cols(),
        }
        .into());
    }
    if x.n_rows() != y.len() || y.is_empty() {
        return Err(NnError::ShapeMismatch(format!(
            "{} rows with {} targets",
            x.n_rows(),
            y.len()
        )));
    }
    Ok(())
}

/// Mini-batch training on (already standardized) data.
///
/// The history holds the full-pass training MSE, and the validation MSE when
/// a validation set is given, after every epoch.
pub fn nn_train(
    net: &Network,
    x_train: &Matrix,
    y_train: &[f64],
    validation: Option<(&Matrix, &[f64])>,
    config: &TrainConfig,
) -> Result<(Network, Vec<EpochLoss>), NnError> {
    config.check()?;
    check_xy(net, x_train, y_train)?;
    if let Some((xv, yv)) = validation {
        check_xy(net, xv, yv)?;
    }

    let mut net = net.clone();
    let mut params = net.parameters();
    let mut first_moment = vec![0.0; params.len()];
    let mut second_moment = vec![0.0; params.len()];
    let mut step: i32 = 0;
    let mut stream = RandomStream::new(config.seed);
    let mut order: Vec<usize> = (0..x_train.n_rows()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let lr = config.learning_rate;

    for epoch in 1..=config.epochs {
        if config.shuffle_each_epoch {
            stream.shuffle(&mut order);
        }
        for batch in order.chunks(config.batch_size) {
            let xb = x_train.select_rows(batch);
            let yb: Vec<f64> = batch.iter().map(|&i| y_train[i]).collect();
            let (_, cache) = nn_forward(&net, &xb)?;
            let grad = nn_backward(&net, &cache, &yb)?.flatten();
            step = step.saturating_add(1);
            match config.optimizer {
                Optimizer::Sgd => {
                    for (p, g) in params.iter_mut().zip(&grad) {
                        *p -= lr * g;
                    }
                }
                Optimizer::Adam {
                    beta1,
                    beta2,
                    epsilon,
                } => {
                    let c1 = 1.0 - beta1.powi(step);
                    let c2 = 1.0 - beta2.powi(step);
                    for k in 0..params.len() {
                        let g = grad[k];
                        first_moment[k] = beta1 * first_moment[k] + (1.0 - beta1) * g;
                        second_moment[k] = beta2 * second_moment[k] + (1.0 - beta2) * g * g;
                        let m_hat = first_moment[k] / c1;
                        let v_hat = second_moment[k] / c2;
                        params[k] -= lr * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
            net.set_parameters(&params)?;
            if !net.is_finite() {
                return Err(NnError::DivergedLoss {
                    epoch,
                    loss: f64::NAN,
                });
            }
        }
        let train_mse = dataset_mse(&net, x_train, y_train)?;
        if !train_mse.is_finite() {
            return Err(NnError::DivergedLoss {
                epoch,
                loss: train_mse,
            });
        }
        let val_mse = match validation {
            Some((xv, yv)) => Some(dataset_mse(&net, xv, yv)?),
            None => None,
        };
        log::trace!("epoch {epoch}: train mse {train_mse}");
        history.push(EpochLoss {
            epoch,
            train_mse,
            val_mse,
        });
    }
    Ok((net, history))
}

/// `epoch,train_mse,val_mse` CSV; `val_mse` is empty without a validation set.
pub fn loss_history_csv(history: &[EpochLoss]) -> String {
    let mut out = String::from("epoch,train_mse,val_mse\n");
    for e in history {
        let val = e.val_mse.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", e.epoch, e.train_mse, val));
    }
    out
}
