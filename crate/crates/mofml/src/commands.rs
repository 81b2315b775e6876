//! Implementations of the `mofml` subcommands, separate from argument parsing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use mofml_core::artifacts::{load_bundle, FeatureValue, PredictError, BUNDLE_EXTENSION};
use mofml_core::pipeline::{run_analyze, run_train, PipelineConfig, PipelineError, TrainOptions};

use crate::service::predict_with;

/// Process outcome: 0 success, 1 partial or total model failure, 2 bad input or config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    ModelFailure,
    InputError,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::ModelFailure => 1,
            Outcome::InputError => 2,
        }
    }

    fn from_pipeline(e: &PipelineError) -> Self {
        if e.is_input_error() {
            Outcome::InputError
        } else {
            Outcome::ModelFailure
        }
    }
}

impl From<Outcome> for ExitCode {
    fn from(o: Outcome) -> Self {
        ExitCode::from(o.code())
    }
}

/// Options shared by `analyze` and `train`.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub paper_order: bool,
}

impl RunOptions {
    pub fn resolve(&self) -> Result<PipelineConfig, PipelineError> {
        let mut config = match (&self.config, &self.data) {
            (Some(path), _) => PipelineConfig::from_file(path)?,
            (None, Some(data)) => PipelineConfig::new(data.clone()),
            (None, None) => {
                return Err(PipelineError::Config(
                    "either --config or --data is required".into(),
                ))
            }
        };
        if let Some(data) = &self.data {
            config.data_path = absolute(data);
        }
        if let Some(out) = &self.out {
            config.output_dir = absolute(out);
        }
        if let Some(seed) = self.seed {
            config.split.seed = seed;
        }
        if self.paper_order {
            config.paper_order = true;
        }
        Ok(config)
    }
}

fn absolute(path: &Path) -> PathBuf {
    std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf())
}

pub fn analyze(options: &RunOptions) -> Outcome {
    let result = options.resolve().and_then(|config| run_analyze(&config));
    match result {
        Ok(summary) => {
            println!(
                "{} of {} rows kept, {} features",
                summary.clean_rows, summary.input_rows, summary.n_features
            );
            if let Some(k) = summary.pca_components {
                println!("PCA components to threshold: {k}");
            }
            for (name, r) in &summary.target_correlations {
                println!("corr(target, {name}) = {r:.4}");
            }
            for file in &summary.files {
                log::info!("wrote {}", file.display());
            }
            Outcome::Success
        }
        Err(e) => {
            eprintln!("error: {e}");
            Outcome::from_pipeline(&e)
        }
    }
}

pub fn train(options: &RunOptions, models: &[String], created_at: Option<String>) -> Outcome {
    let train_options = TrainOptions {
        kinds: if models.is_empty() {
            None
        } else {
            Some(models.to_vec())
        },
        created_at,
    };
    let result = options
        .resolve()
        .and_then(|config| run_train(&config, &train_options));
    match result {
        Ok(summary) => {
            print!("{}", summary.table_text);
            for file in summary.files.iter().chain(&summary.bundles) {
                log::info!("wrote {}", file.display());
            }
            let failed = summary.failed_models();
            if failed > 0 {
                for row in summary.report.rows.iter().filter(|r| r.error.is_some()) {
                    eprintln!(
                        "model {} failed: {}",
                        row.model,
                        row.error.as_deref().unwrap_or("")
                    );
                }
                Outcome::ModelFailure
            } else {
                Outcome::Success
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            Outcome::from_pipeline(&e)
        }
    }
}

/// Where to find the bundle for `predict`.
#[derive(Debug, Clone)]
pub enum BundleSource {
    File(PathBuf),
    Named { dir: PathBuf, model: String },
}

impl BundleSource {
    fn path(&self) -> PathBuf {
        match self {
            BundleSource::File(p) => p.clone(),
            BundleSource::Named { dir, model } => dir.join(format!("{model}{BUNDLE_EXTENSION}")),
        }
    }
}

/// Accepts inline JSON (starting with `{`) or a path to a JSON file.
pub fn read_features(arg: &str) -> Result<BTreeMap<String, FeatureValue>, String> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| format!("cannot read features file {arg}: {e}"))?
    };
    serde_json::from_str(&text)
        .map_err(|e| format!("features must be a JSON object of names to values: {e}"))
}

pub fn predict(source: &BundleSource, features: &str, json: bool) -> Outcome {
    let path = source.path();
    let bundle = match load_bundle(&path) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return Outcome::InputError;
        }
    };
    let features = match read_features(features) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return Outcome::InputError;
        }
    };
    match predict_with(&bundle, &features) {
        Ok(response) => {
            for w in &response.warnings {
                eprintln!("warning: {}", w.message);
            }
            if json {
                println!(
                    "{}",
                    serde_json::to_string(&response).expect("response serializes")
                );
            } else {
                println!("{}", response.prediction);
            }
            Outcome::Success
        }
        Err(e @ PredictError::NonFinitePrediction) => {
            eprintln!("error: {e}");
            Outcome::ModelFailure
        }
        Err(e) => {
            eprintln!("error [{}]: {e}", e.code());
            Outcome::InputError
        }
    }
}
