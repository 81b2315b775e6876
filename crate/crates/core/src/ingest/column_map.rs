use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{IngestError, RawTable};

/// Columns appended from a parsed MOF name, in this order.
pub const NAME_FEATURES: [&str; 5] = [
    "metal_units",
    "linker1_count",
    "linker2_count",
    "net_code",
    "space_group",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub header: String,
    #[serde(default = "numeric")]
    pub kind: FeatureKind,
    #[serde(default)]
    pub nonnegative: bool,
}

fn numeric() -> FeatureKind {
    FeatureKind::Numeric
}

impl FeatureColumn {
    pub fn numeric(header: impl Into<String>, nonnegative: bool) -> Self {
        FeatureColumn {
            header: header.into(),
            kind: FeatureKind::Numeric,
            nonnegative,
        }
    }

    pub fn categorical(header: impl Into<String>) -> Self {
        FeatureColumn {
            header: header.into(),
            kind: FeatureKind::Categorical,
            nonnegative: false,
        }
    }
}

/// Which CSV headers feed the pipeline and how to interpret them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMap {
    /// Column holding MOF names; parsed into [`NAME_FEATURES`] when set.
    #[serde(default)]
    pub name_column: Option<String>,
    /// Regression target, CO₂ uptake in mol/kg.
    pub target_column: String,
    pub features: Vec<FeatureColumn>,
    /// Numeric columns that are cleaned and analysed (correlation, histograms)
    /// but never used as model inputs, e.g. CO₂/N₂ selectivity.
    #[serde(default)]
    pub analysis_columns: Vec<String>,
    #[serde(default)]
    pub void_volume_column: Option<String>,
    #[serde(default)]
    pub total_volume_column: Option<String>,
    #[serde(default)]
    pub void_fraction_column: Option<String>,
}

impl ColumnMap {
    /// Default map for the hypothetical-MOF screening export.
    ///
    /// Headers follow the layout documented in `docs/config.example.toml`;
    /// other dataset versions should supply their own map.
    pub fn materials_cloud_default() -> Self {
        ColumnMap {
            name_column: Some("MOFname".into()),
            target_column: "CO2_uptake [mol/kg]".into(),
            features: vec![
                FeatureColumn::numeric("void_fraction", true),
                FeatureColumn::numeric("void_volume [cm^3/g]", true),
                FeatureColumn::numeric("largest_cavity_diameter [A]", true),
                FeatureColumn::numeric("pore_limiting_diameter [A]", true),
                FeatureColumn::numeric("surface_area [m^2/g]", true),
                FeatureColumn::numeric("weight [u]", true),
                FeatureColumn::numeric("volume [A^3]", true),
                FeatureColumn::numeric("henry_coefficient_CO2 [mol/kg/Pa]", true),
                FeatureColumn::numeric("heat_adsorption_CO2 [kcal/mol]", false),
                FeatureColumn::categorical("functional_groups"),
            ],
            analysis_columns: vec!["CO2/N2_selectivity".into()],
            void_volume_column: None,
            total_volume_column: None,
            void_fraction_column: Some("void_fraction".into()),
        }
    }

    /// Names of the model input columns after cleaning, in matrix order.
    pub fn output_feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.features.iter().map(|f| f.header.clone()).collect();
        if self.name_column.is_some() {
            names.extend(NAME_FEATURES.iter().map(|s| s.to_string()));
        }
        names
    }

    /// Every header the map refers to, each once.
    pub fn referenced_headers(&self) -> Vec<&str> {
        let mut all: Vec<&str> = Vec::new();
        all.extend(self.name_column.as_deref());
        all.push(&self.target_column);
        all.extend(self.features.iter().map(|f| f.header.as_str()));
        all.extend(self.analysis_columns.iter().map(String::as_str));
        all.extend(self.void_volume_column.as_deref());
        all.extend(self.total_volume_column.as_deref());
        all.extend(self.void_fraction_column.as_deref());
        let mut out: Vec<&str> = Vec::with_capacity(all.len());
        for h in all {
            if !out.contains(&h) {
                out.push(h);
            }
        }
        out
    }

    /// Checks internal consistency of the map.
    pub fn check(&self) -> Result<(), IngestError> {
        if self.features.is_empty() {
            return Err(IngestError::InvalidMap("no feature columns".into()));
        }
        if self.features.iter().any(|f| f.header == self.target_column) {
            return Err(IngestError::InvalidMap(format!(
                "target column {:?} is also listed as a feature",
                self.target_column
            )));
        }
        let mut seen = HashSet::new();
        for name in self.output_feature_names() {
            if !seen.insert(name.clone()) {
                return Err(IngestError::InvalidMap(format!(
                    "feature {name:?} appears twice"
                )));
            }
        }
        if let Some(name) = &self.name_column {
            if self.features.iter().any(|f| &f.header == name) {
                return Err(IngestError::InvalidMap(format!(
                    "name column {name:?} cannot also be a feature"
                )));
            }
        }
        Ok(())
    }

    /// Checks the map and that every referenced header exists in `raw`.
    pub fn validate(&self, raw: &RawTable) -> Result<(), IngestError> {
        self.check()?;
        self.validate_headers(&raw.headers)
    }

    pub fn validate_headers(&self, headers: &[String]) -> Result<(), IngestError> {
        for h in self.referenced_headers() {
            if !headers.iter().any(|x| x == h) {
                return Err(IngestError::MissingColumn {
                    column: h.to_string(),
                });
            }
        }
        Ok(())
    }
}
