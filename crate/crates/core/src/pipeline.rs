//! End-to-end runs driven by a TOML configuration: data analysis and
//! model training with every report and bundle written to an output directory.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifacts::{bundles_from_run, save_bundle, ArtifactError, BUNDLE_EXTENSION};
use crate::evaluate::{
    compare_models, comparison_csv, comparison_table, histogram, pearson_matrix, timings_csv,
    CompareOptions, ComparisonReport, EvalError, ModelConfig, PcaModelConfig, TrainedModel,
};
use crate::forest::importances_csv;
use crate::ingest::{clean, load_csv, CleanTable, CleaningRules, ColumnMap, IngestError};
use crate::linear::coefficients_csv;
use crate::neuralnet::loss_history_csv;
use crate::numeric::Matrix;
use crate::preprocess::{fit_scaler, pca_fit, PcaTarget, PreprocessError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("every model failed to train")]
    AllModelsFailed,
}

impl PipelineError {
    /// Errors caused by the inputs or configuration rather than by a model.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            PipelineError::AllModelsFailed | PipelineError::Eval(_) | PipelineError::Artifact(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub ratio: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            ratio: 0.7,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaConfig {
    pub enabled: bool,
    pub threshold: f64,
}

impl Default for PcaConfig {
    fn default() -> Self {
        PcaConfig {
            enabled: true,
            threshold: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub histogram_bins: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig { histogram_bins: 30 }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("mofml-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Relative paths are resolved against the directory of the config file.
    pub data_path: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "ColumnMap::materials_cloud_default")]
    pub column_map: ColumnMap,
    #[serde(default)]
    pub cleaning: CleaningRules,
    #[serde(default)]
    pub split: SplitConfig,
    /// Standardize on all rows before splitting.
    #[serde(default)]
    pub paper_order: bool,
    #[serde(default)]
    pub pca: PcaConfig,
    /// Models to compare; empty means the default set.
    #[serde(default)]
    pub models: Vec<ModelConfig>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    pub fn new(data_path: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            data_path: data_path.into(),
            output_dir: default_output_dir(),
            column_map: ColumnMap::materials_cloud_default(),
            cleaning: CleaningRules::default(),
            split: SplitConfig::default(),
            paper_order: false,
            pca: PcaConfig::default(),
            models: Vec::new(),
            analysis: AnalysisConfig::default(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut config: PipelineConfig =
            toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.base_dir = base_dir.to_path_buf();
        config.check()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("")).to_path_buf();
        Self::from_toml_str(&text, &base)
    }

    pub fn check(&self) -> Result<(), PipelineError> {
        if !(self.split.ratio > 0.0 && self.split.ratio < 1.0) {
            return Err(PipelineError::Config(format!(
                "split.ratio must lie in (0, 1), got {}",
                self.split.ratio
            )));
        }
        if !(self.pca.threshold > 0.0 && self.pca.threshold <= 1.0) {
            return Err(PipelineError::Config(format!(
                "pca.threshold must lie in (0, 1], got {}",
                self.pca.threshold
            )));
        }
        if self.analysis.histogram_bins == 0 {
            return Err(PipelineError::Config(
                "analysis.histogram_bins must be at least 1".into(),
            ));
        }
        self.column_map
            .check()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn resolved_data_path(&self) -> PathBuf {
        self.resolve(&self.data_path)
    }

    pub fn resolved_output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// Configured models, or the default set when none are listed.
    pub fn model_configs(&self) -> Vec<ModelConfig> {
        if !self.models.is_empty() {
            return self.models.clone();
        }
        ModelConfig::all_defaults()
            .into_iter()
            .filter_map(|m| match m {
                ModelConfig::LinearPca(_) if !self.pca.enabled => None,
                ModelConfig::LinearPca(_) => Some(ModelConfig::LinearPca(PcaModelConfig {
                    threshold: self.pca.threshold,
                })),
                other => Some(other),
            })
            .collect()
    }

    /// The configured models restricted to `kinds`; kinds that are not
    /// configured fall back to their defaults.
    pub fn select_models(&self, kinds: &[String]) -> Result<Vec<ModelConfig>, PipelineError> {
        let configured = self.model_configs();
        let mut selected = Vec::new();
        for kind in kinds {
            if ModelConfig::default_for(kind).is_none() {
                return Err(PipelineError::Config(format!(
                    "unknown model kind {kind:?} (expected one of {})",
                    ModelConfig::KINDS.join(", ")
                )));
            }
            let matching: Vec<ModelConfig> = configured
                .iter()
                .filter(|m| m.name() == kind)
                .cloned()
                .collect();
            if matching.is_empty() {
                let mut fallback = ModelConfig::default_for(kind).expect("checked above");
                if let ModelConfig::LinearPca(c) = &mut fallback {
                    c.threshold = self.pca.threshold;
                }
                selected.push(fallback);
            } else {
                selected.extend(matching);
            }
        }
        Ok(selected)
    }

    /// What gets recorded in bundles: the configuration minus where outputs go.
    pub fn echo(&self) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output_dir");
        }
        value
    }
}

fn write_file(
    dir: &Path,
    name: &str,
    contents: &str,
    written: &mut Vec<PathBuf>,
) -> Result<(), PipelineError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| PipelineError::Io {
        path: path.clone(),
        source,
    })?;
    written.push(path);
    Ok(())
}

fn prepare_output(config: &PipelineConfig) -> Result<PathBuf, PipelineError> {
    let out = config.resolved_output_dir();
    fs::create_dir_all(&out).map_err(|source| PipelineError::Io {
        path: out.clone(),
        source,
    })?;
    Ok(out)
}

/// Loads and cleans the configured dataset.
pub fn load_table(config: &PipelineConfig) -> Result<CleanTable, PipelineError> {
    let raw = load_csv(&config.resolved_data_path(), &config.column_map)?;
    let table = clean(&raw, &config.column_map, &config.cleaning)?;
    log::info!(
        "cleaned {} of {} rows ({} dropped), {} features",
        table.n_rows(),
        table.input_rows,
        table.dropped_row_count,
        table.n_features()
    );
    Ok(table)
}

/// File-name-safe version of a column header: runs of anything other than
/// ASCII letters and digits become a single underscore.
pub fn file_stem(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c);
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    let trimmed = out.trim_matches('_');
    if trimmed.is_empty() {
        "column".into()
    } else {
        trimmed.to_string()
    }
}

#[derive(Debug, Clone)]
pub struct AnalyzeSummary {
    pub input_rows: usize,
    pub clean_rows: usize,
    pub n_features: usize,
    /// Components needed to reach the PCA threshold, when PCA is enabled.
    pub pca_components: Option<usize>,
    /// Correlation of the target with each analysis-only column.
    pub target_correlations: Vec<(String, f64)>,
    pub files: Vec<PathBuf>,
}

/// Writes `cleaning_report.csv`, `correlation.csv`, one `hist_<column>.csv`
/// per feature, target and analysis column, and `pca_scree.csv`.
pub fn run_analyze(config: &PipelineConfig) -> Result<AnalyzeSummary, PipelineError> {
    config.check()?;
    let table = load_table(config)?;
    let out = prepare_output(config)?;
    let mut files = Vec::new();
    write_file(
        &out,
        "cleaning_report.csv",
        &table.cleaning_report_csv(),
        &mut files,
    )?;

    let mut names = table.feature_names.clone();
    names.push(table.target_name.clone());
    names.extend(table.analysis_names.iter().cloned());
    let target = Matrix::column_vector(&table.y);
    let mut all = table.x.hstack(&target).map_err(PreprocessError::from)?;
    if table.analysis.n_cols() > 0 {
        all = all.hstack(&table.analysis).map_err(PreprocessError::from)?;
    }
    let corr = pearson_matrix(&all, &names)?;
    write_file(&out, "correlation.csv", &corr.to_csv(), &mut files)?;
    let target_correlations = table
        .analysis_names
        .iter()
        .map(|a| (a.clone(), corr.get(&table.target_name, a).expect("present")))
        .collect();

    let mut used = BTreeSet::new();
    for (j, name) in names.iter().enumerate() {
        let hist = histogram(name, &all.column(j), config.analysis.histogram_bins)?;
        let mut stem = file_stem(name);
        let mut k = 2;
        while !used.insert(stem.clone()) {
            stem = format!("{}_{k}", file_stem(name));
            k += 1;
        }
        write_file(
            &out,
            &format!("hist_{stem}.csv"),
            &hist.to_csv(),
            &mut files,
        )?;
    }

    let pca_components = if config.pca.enabled && table.n_rows() >= 2 {
        let standardized = fit_scaler(&table.x)?.apply(&table.x)?;
        let pca = pca_fit(
            &standardized,
            PcaTarget::VarianceThreshold(config.pca.threshold),
        )?;
        let mut csv = String::from("component,explained_ratio,cumulative_ratio\n");
        let mut cumulative = 0.0;
        for (i, r) in pca.full_explained_ratio.iter().enumerate() {
            cumulative += r;
            csv.push_str(&format!("{},{},{}\n", i + 1, r, cumulative));
        }
        write_file(&out, "pca_scree.csv", &csv, &mut files)?;
        log::info!(
            "{} of {} principal components explain {} of the variance",
            pca.n_components(),
            pca.input_dim(),
            config.pca.threshold
        );
        Some(pca.n_components())
    } else {
        None
    };

    Ok(AnalyzeSummary {
        input_rows: table.input_rows,
        clean_rows: table.n_rows(),
        n_features: table.n_features(),
        pca_components,
        target_correlations,
        files,
    })
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Restrict training to these model kinds.
    pub kinds: Option<Vec<String>>,
    /// Timestamp recorded in bundles; `None` keeps reruns byte-identical.
    pub created_at: Option<String>,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub report: ComparisonReport,
    pub table_text: String,
    pub bundles: Vec<PathBuf>,
    pub files: Vec<PathBuf>,
}

impl TrainSummary {
    pub fn failed_models(&self) -> usize {
        self.report.failures()
    }
}

/// Trains and compares the configured models, then writes the reports and
/// one `<model>.mofml.json` bundle per successful model.
pub fn run_train(
    config: &PipelineConfig,
    options: &TrainOptions,
) -> Result<TrainSummary, PipelineError> {
    config.check()?;
    let configs = match &options.kinds {
        Some(kinds) if !kinds.is_empty() => config.select_models(kinds)?,
        _ => config.model_configs(),
    };
    if configs.is_empty() {
        return Err(PipelineError::Config("no models selected".into()));
    }
    let table = load_table(config)?;
    let out = prepare_output(config)?;
    let mut files = Vec::new();
    write_file(
        &out,
        "cleaning_report.csv",
        &table.cleaning_report_csv(),
        &mut files,
    )?;

    let compare = CompareOptions {
        ratio: config.split.ratio,
        seed: config.split.seed,
        paper_order: config.paper_order,
    };
    let run = compare_models(&table, &configs, &compare)?;
    let table_text = comparison_table(&run.report);
    write_file(
        &out,
        "comparison.csv",
        &comparison_csv(&run.report),
        &mut files,
    )?;
    write_file(&out, "timings.csv", &timings_csv(&run.report), &mut files)?;
    write_file(&out, "comparison.txt", &table_text, &mut files)?;

    for (row, model) in run.report.rows.iter().zip(&run.models) {
        let suffix = if row.model.contains("_#") {
            format!("_{}", file_stem(&row.model))
        } else {
            String::new()
        };
        match model {
            Some(TrainedModel::Forest(forest)) => {
                let named = forest
                    .clone()
                    .with_feature_names(table.feature_names.clone());
                write_file(
                    &out,
                    &format!("importance_forest{suffix}.csv"),
                    &importances_csv(&named),
                    &mut files,
                )?;
                let dot = named.trees[0].to_dot(&table.feature_names);
                write_file(&out, &format!("forest_tree0{suffix}.dot"), &dot, &mut files)?;
            }
            Some(TrainedModel::Lasso { model, path }) => {
                let csv = coefficients_csv(&table.feature_names, &model.weights);
                write_file(
                    &out,
                    &format!("lasso_coefficients{suffix}.csv"),
                    &csv,
                    &mut files,
                )?;
                let mut path_csv = String::from("lambda,nonzero,test_mse\n");
                for p in path {
                    path_csv.push_str(&format!("{},{},{}\n", p.lambda, p.nonzero, p.test_mse));
                }
                write_file(
                    &out,
                    &format!("lasso_path{suffix}.csv"),
                    &path_csv,
                    &mut files,
                )?;
            }
            Some(TrainedModel::NeuralNet { history, .. }) => {
                write_file(
                    &out,
                    &format!("nn_loss_history{suffix}.csv"),
                    &loss_history_csv(history),
                    &mut files,
                )?;
            }
            _ => {}
        }
    }

    let bundles = bundles_from_run(&table, &run, &config.echo(), options.created_at.as_deref());
    let mut bundle_paths = Vec::new();
    for bundle in &bundles {
        let path = out.join(format!(
            "{}{BUNDLE_EXTENSION}",
            file_stem(&bundle.model_name)
        ));
        save_bundle(bundle, &path)?;
        bundle_paths.push(path);
    }
    if bundles.is_empty() {
        return Err(PipelineError::AllModelsFailed);
    }
    Ok(TrainSummary {
        report: run.report,
        table_text,
        bundles: bundle_paths,
        files,
    })
}
