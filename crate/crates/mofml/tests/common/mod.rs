#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mofml_core::artifacts::{
    save_bundle, BundleMetadata, FeatureSchema, FeatureValue, ModelBundle, ModelKind, ModelParams,
    BUNDLE_EXTENSION, SCHEMA_VERSION,
};
use mofml_core::ingest::FeatureKind;
use mofml_core::linear::LinearModel;
use mofml_core::pipeline::{run_train, PipelineConfig, TrainOptions};
use mofml_core::preprocess::Scaler;
use mofml_core::synth::mof_csv;

/// One-feature linear bundle computing `w * x + b` on unscaled input.
pub fn affine_bundle(name: &str, w: f64, b: f64) -> ModelBundle {
    ModelBundle {
        schema_version: SCHEMA_VERSION,
        kind: ModelKind::Linear,
        model_name: name.into(),
        features: vec![FeatureSchema {
            name: "x".into(),
            kind: FeatureKind::Numeric,
            min: 0.0,
            max: 10.0,
        }],
        codebooks: Vec::new(),
        name_column: None,
        scaler: Scaler {
            means: vec![0.0],
            stds: vec![1.0],
            constant_features: Vec::new(),
        },
        target_scaler: None,
        pca: None,
        params: ModelParams::Linear(LinearModel {
            weights: vec![w],
            intercept: b,
            trained_on: vec!["x".into()],
        }),
        metadata: BundleMetadata {
            seed: 0,
            created_at: None,
            dataset_fingerprint: "sha256:00".into(),
            feature_names: vec!["x".into()],
            target_name: "y".into(),
            hyperparameters: String::new(),
            train_metrics: None,
            test_metrics: None,
            config: serde_json::Value::Null,
        },
    }
}

pub fn write_bundle(dir: &Path, bundle: &ModelBundle) -> PathBuf {
    let path = dir.join(format!("{}{BUNDLE_EXTENSION}", bundle.model_name));
    save_bundle(bundle, &path).unwrap();
    path
}

/// Writes a synthetic MOF CSV and a config pointing at it; returns the config path.
pub fn write_mof_project(dir: &Path, rows: usize, seed: u64) -> PathBuf {
    std::fs::write(dir.join("mofs.csv"), mof_csv(rows, 0.1, seed)).unwrap();
    let config =
        "data_path = \"mofs.csv\"\noutput_dir = \"out\"\n\n[split]\nratio = 0.7\nseed = 3\n";
    let path = dir.join("config.toml");
    std::fs::write(&path, config).unwrap();
    path
}

/// Trains the given kinds on synthetic MOF data and returns the output directory.
pub fn trained_mof_bundles(dir: &Path, kinds: &[&str]) -> PathBuf {
    let config_path = write_mof_project(dir, 240, 11);
    let config = PipelineConfig::from_file(&config_path).unwrap();
    let options = TrainOptions {
        kinds: Some(kinds.iter().map(|s| s.to_string()).collect()),
        created_at: None,
    };
    run_train(&config, &options).unwrap();
    config.resolved_output_dir()
}

/// A complete, in-range input for `bundle`: numeric midpoints and the first category.
pub fn midpoint_features(bundle: &ModelBundle) -> BTreeMap<String, FeatureValue> {
    bundle
        .features
        .iter()
        .map(|f| {
            let value = match bundle.codebook(&f.name) {
                Some(cb) => FeatureValue::Text(cb.categories[0].clone()),
                None => FeatureValue::Number(0.5 * (f.min + f.max)),
            };
            (f.name.clone(), value)
        })
        .collect()
}
