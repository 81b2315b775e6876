use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{FeatureKind, NameFeatures, NAME_FEATURES};

use super::bundle::ModelBundle;

/// A raw feature value as supplied by a caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureValue {
    Number(f64),
    Text(String),
}

impl From<f64> for FeatureValue {
    fn from(v: f64) -> Self {
        FeatureValue::Number(v)
    }
}

impl From<&str> for FeatureValue {
    fn from(v: &str) -> Self {
        FeatureValue::Text(v.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningCode {
    OutOfRange,
    UnknownFeature,
    NameMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionWarning {
    pub code: WarningCode,
    pub feature: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub value: f64,
    pub warnings: Vec<PredictionWarning>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictError {
    #[error("missing features: {}", .features.join(", "))]
    MissingFeature { features: Vec<String> },
    #[error("unknown category {value:?} for feature {feature:?}")]
    UnknownCategory { feature: String, value: String },
    #[error("invalid value for feature {feature:?}: {reason}")]
    InvalidValue { feature: String, reason: String },
    #[error("model produced a non-finite prediction")]
    NonFinitePrediction,
}

impl PredictError {
    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            PredictError::MissingFeature { .. } => "missing_feature",
            PredictError::UnknownCategory { .. } => "unknown_category",
            PredictError::InvalidValue { .. } => "invalid_value",
            PredictError::NonFinitePrediction => "non_finite_prediction",
        }
    }
}

fn name_feature_values(parsed: &NameFeatures) -> [(&'static str, FeatureValue); 5] {
    [
        (
            NAME_FEATURES[0],
            FeatureValue::Number(parsed.metal_units as f64),
        ),
        (
            NAME_FEATURES[1],
            FeatureValue::Number(parsed.linker1_count as f64),
        ),
        (
            NAME_FEATURES[2],
            FeatureValue::Number(parsed.linker2_count as f64),
        ),
        (
            NAME_FEATURES[3],
            FeatureValue::Text(parsed.net_code.clone()),
        ),
        (
            NAME_FEATURES[4],
            FeatureValue::Number(parsed.space_group as f64),
        ),
    ]
}

/// Applies the bundle's feature schema (encoding, scaling, optional PCA) and
/// evaluates the model.
///
/// When the bundle was trained with a name column, a MOF name under that key
/// supplies any name-derived features not given explicitly. Values outside
/// the training range still predict but carry a warning.
pub fn predict(
    bundle: &ModelBundle,
    inputs: &BTreeMap<String, FeatureValue>,
) -> Result<Prediction, PredictError> {
    let mut warnings = Vec::new();
    let mut values: BTreeMap<String, FeatureValue> = inputs.clone();

    if let Some(name_column) = &bundle.name_column {
        if let Some(raw) = inputs.get(name_column) {
            let FeatureValue::Text(text) = raw else {
                return Err(PredictError::InvalidValue {
                    feature: name_column.clone(),
                    reason: "expected a MOF name string".into(),
                });
            };
            let parsed: NameFeatures =
                text.parse().map_err(|e: crate::ingest::NameParseError| {
                    PredictError::InvalidValue {
                        feature: name_column.clone(),
                        reason: e.to_string(),
                    }
                })?;
            for (feature, derived) in name_feature_values(&parsed) {
                if !bundle.features.iter().any(|f| f.name == feature) {
                    continue;
                }
                match values.get(feature) {
                    None => {
                        values.insert(feature.to_string(), derived);
                    }
                    Some(given) if *given != derived => warnings.push(PredictionWarning {
                        code: WarningCode::NameMismatch,
                        feature: feature.to_string(),
                        message: format!(
                            "explicit value overrides the one implied by {name_column}"
                        ),
                    }),
                    Some(_) => {}
                }
            }
        }
    }

    for key in inputs.keys() {
        let known = bundle.features.iter().any(|f| &f.name == key)
            || bundle.name_column.as_ref() == Some(key);
        if !known {
            warnings.push(PredictionWarning {
                code: WarningCode::UnknownFeature,
                feature: key.clone(),
                message: "not a model feature; ignored".into(),
            });
        }
    }

    let missing: Vec<String> = bundle
        .features
        .iter()
        .filter(|f| !values.contains_key(&f.name))
        .map(|f| f.name.clone())
        .collect();
    if !missing.is_empty() {
        return Err(PredictError::MissingFeature { features: missing });
    }

    let mut row = Vec::with_capacity(bundle.n_features());
    for schema in &bundle.features {
        let value = &values[&schema.name];
        let encoded = match (schema.kind, value) {
            (FeatureKind::Numeric, FeatureValue::Number(v)) => {
                if !v.is_finite() {
                    return Err(PredictError::InvalidValue {
                        feature: schema.name.clone(),
                        reason: "value must be finite".into(),
                    });
                }
                if *v < schema.min || *v > schema.max {
                    warnings.push(PredictionWarning {
                        code: WarningCode::OutOfRange,
                        feature: schema.name.clone(),
                        message: format!(
                            "{v} is outside the training range [{}, {}]",
                            schema.min, schema.max
                        ),
                    });
                }
                *v
            }
            (FeatureKind::Numeric, FeatureValue::Text(_)) => {
                return Err(PredictError::InvalidValue {
                    feature: schema.name.clone(),
                    reason: "expected a number".into(),
                })
            }
            (FeatureKind::Categorical, FeatureValue::Text(category)) => {
                let book = bundle.codebook(&schema.name).expect("validated bundle");
                match book.code(category) {
                    Some(code) => code as f64,
                    None => {
                        return Err(PredictError::UnknownCategory {
                            feature: schema.name.clone(),
                            value: category.clone(),
                        })
                    }
                }
            }
            (FeatureKind::Categorical, FeatureValue::Number(_)) => {
                return Err(PredictError::InvalidValue {
                    feature: schema.name.clone(),
                    reason: "expected a category label".into(),
                })
            }
        };
        row.push(encoded);
    }

    bundle.scaler.apply_row_in_place(&mut row);
    let model_input = match &bundle.pca {
        Some(pca) => pca.transform_row(&row),
        None => row,
    };
    let raw = bundle
        .params
        .regressor()
        .predict_row_unchecked(&model_input);
    let value = match &bundle.target_scaler {
        Some(ts) => ts.invert_scalar(raw),
        None => raw,
    };
    if !value.is_finite() {
        return Err(PredictError::NonFinitePrediction);
    }
    Ok(Prediction { value, warnings })
}
