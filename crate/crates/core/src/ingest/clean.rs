//! Row filtering and categorical encoding.
//!
//! A row is dropped for the first (highest-priority) rule it violates, so the
//! per-reason counts plus the surviving rows always add up to the input.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    parse_mof_name, Codebook, ColumnMap, FeatureKind, IngestError, NameFeatures, RawTable,
    NAME_FEATURES,
};
use crate::numeric::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleaningRules {
    /// Cell values treated like an empty cell (compared after trimming).
    pub null_tokens: Vec<String>,
    /// Drop rows where a column flagged `nonnegative` is negative.
    pub drop_negative: bool,
    /// Drop rows whose void fraction lies outside `[0, 1]`.
    pub check_void_fraction_range: bool,
    /// Relative tolerance for `void_fraction ≈ void_volume / total_volume`.
    pub consistency_tol: f64,
}

impl Default for CleaningRules {
    fn default() -> Self {
        CleaningRules {
            null_tokens: ["NA", "N/A", "null", "NULL", "None", "none", "-"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            drop_negative: true,
            check_void_fraction_range: true,
            consistency_tol: 1e-6,
        }
    }
}

/// Why a row was dropped; variants are listed in priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// Empty cell or a configured null token.
    Empty,
    /// NaN or ±Inf.
    Nan,
    Unparsable,
    BadName,
    Negative,
    VoidFractionRange,
    VoidFractionInconsistent,
}

impl DropReason {
    pub const ALL: [DropReason; 7] = [
        DropReason::Empty,
        DropReason::Nan,
        DropReason::Unparsable,
        DropReason::BadName,
        DropReason::Negative,
        DropReason::VoidFractionRange,
        DropReason::VoidFractionInconsistent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::Empty => "empty",
            DropReason::Nan => "nan",
            DropReason::Unparsable => "unparsable",
            DropReason::BadName => "bad_name",
            DropReason::Negative => "negative",
            DropReason::VoidFractionRange => "void_fraction_range",
            DropReason::VoidFractionInconsistent => "void_fraction_inconsistent",
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DropCounts(BTreeMap<DropReason, usize>);

impl DropCounts {
    pub fn get(&self, reason: DropReason) -> usize {
        self.0.get(&reason).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.0.values().sum()
    }

    fn bump(&mut self, reason: DropReason) {
        *self.0.entry(reason).or_insert(0) += 1;
    }

    /// Nonzero counts in priority order.
    pub fn iter(&self) -> impl Iterator<Item = (DropReason, usize)> + '_ {
        self.0.iter().map(|(r, c)| (*r, *c))
    }
}

/// Numeric model inputs and target after cleaning and encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanTable {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub feature_names: Vec<String>,
    pub feature_kinds: Vec<FeatureKind>,
    /// One codebook per categorical feature.
    pub codebooks: Vec<Codebook>,
    pub target_name: String,
    pub name_column: Option<String>,
    /// Analysis-only columns (never model inputs).
    pub analysis: Matrix,
    pub analysis_names: Vec<String>,
    /// Raw row index of each surviving row, ascending.
    pub kept_rows: Vec<usize>,
    pub input_rows: usize,
    pub dropped_row_count: usize,
    pub drop_reasons: DropCounts,
}

impl CleanTable {
    /// Wraps an already-numeric design matrix (synthetic benchmarks, tests).
    pub fn from_matrix(
        x: Matrix,
        y: Vec<f64>,
        feature_names: Vec<String>,
        target_name: &str,
    ) -> Self {
        assert_eq!(x.n_rows(), y.len());
        assert_eq!(x.n_cols(), feature_names.len());
        let n = y.len();
        CleanTable {
            feature_kinds: vec![FeatureKind::Numeric; feature_names.len()],
            x,
            y,
            feature_names,
            codebooks: Vec::new(),
            target_name: target_name.to_string(),
            name_column: None,
            analysis: Matrix::zeros(n, 0),
            analysis_names: Vec::new(),
            kept_rows: (0..n).collect(),
            input_rows: n,
            dropped_row_count: 0,
            drop_reasons: DropCounts::default(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn codebook(&self, feature: &str) -> Option<&Codebook> {
        self.codebooks.iter().find(|b| b.column == feature)
    }

    /// `reason,count` rows for every rule plus `kept` and `input` totals.
    pub fn cleaning_report_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["reason", "count"])
            .expect("in-memory write");
        for r in DropReason::ALL {
            w.write_record([r.as_str(), &self.drop_reasons.get(r).to_string()])
                .expect("in-memory write");
        }
        w.write_record(["kept", &self.n_rows().to_string()])
            .expect("in-memory write");
        w.write_record(["input", &self.input_rows.to_string()])
            .expect("in-memory write");
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii")
    }
}

pub fn derive_void_fraction(void_volume: f64, total_volume: f64) -> Result<f64, IngestError> {
    if !(total_volume > 0.0) {
        return Err(IngestError::NonPositiveTotalVolume { total_volume });
    }
    Ok(void_volume / total_volume)
}

enum Cell<'a> {
    Number(f64),
    Text(&'a str),
}

struct ColumnPlan {
    index: usize,
    categorical: bool,
    nonnegative: bool,
}

pub fn clean(
    raw: &RawTable,
    map: &ColumnMap,
    rules: &CleaningRules,
) -> Result<CleanTable, IngestError> {
    map.validate(raw)?;
    let idx = |h: &str| raw.column_index(h).expect("validated header");

    let features: Vec<ColumnPlan> = map
        .features
        .iter()
        .map(|f| ColumnPlan {
            index: idx(&f.header),
            categorical: f.kind == FeatureKind::Categorical,
            nonnegative: f.nonnegative,
        })
        .collect();
    let target = idx(&map.target_column);
    let analysis: Vec<usize> = map.analysis_columns.iter().map(|h| idx(h)).collect();
    let name_col = map.name_column.as_deref().map(idx);
    let vf_col = map.void_fraction_column.as_deref().map(idx);
    let vv_col = map.void_volume_column.as_deref().map(idx);
    let tv_col = map.total_volume_column.as_deref().map(idx);

    let is_null = |cell: &str| {
        let t = cell.trim();
        t.is_empty() || rules.null_tokens.iter().any(|n| n == t)
    };
    let parse_number = |cell: &str| -> Result<f64, DropReason> {
        if is_null(cell) {
            return Err(DropReason::Empty);
        }
        match cell.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(_) => Err(DropReason::Nan),
            Err(_) => Err(DropReason::Unparsable),
        }
    };

    let mut drop_reasons = DropCounts::default();
    let mut kept_rows = Vec::new();
    let mut feature_cells: Vec<Vec<Cell>> = Vec::new();
    let mut names: Vec<NameFeatures> = Vec::new();
    let mut targets = Vec::new();
    let mut analysis_values: Vec<f64> = Vec::new();

    for (row_index, row) in raw.rows.iter().enumerate() {
        let mut worst: Option<DropReason> = None;
        let mut note = |r: DropReason| {
            worst = Some(worst.map_or(r, |w| w.min(r)));
        };

        let mut cells = Vec::with_capacity(features.len());
        for plan in &features {
            let cell = &row[plan.index];
            if plan.categorical {
                if is_null(cell) {
                    note(DropReason::Empty);
                }
                cells.push(Cell::Text(cell.as_str()));
            } else {
                match parse_number(cell) {
                    Ok(v) => {
                        if rules.drop_negative && plan.nonnegative && v < 0.0 {
                            note(DropReason::Negative);
                        }
                        cells.push(Cell::Number(v));
                    }
                    Err(r) => {
                        note(r);
                        cells.push(Cell::Number(f64::NAN));
                    }
                }
            }
        }

        let y = parse_number(&row[target]).unwrap_or_else(|r| {
            note(r);
            f64::NAN
        });
        let extra: Vec<f64> = analysis
            .iter()
            .map(|&c| {
                parse_number(&row[c]).unwrap_or_else(|r| {
                    note(r);
                    f64::NAN
                })
            })
            .collect();

        let name = name_col.and_then(|c| {
            let cell = &row[c];
            if is_null(cell) {
                note(DropReason::Empty);
                return None;
            }
            match parse_mof_name(cell.trim()) {
                Ok(n) => Some(n),
                Err(_) => {
                    note(DropReason::BadName);
                    None
                }
            }
        });

        let mut read_opt = |col: Option<usize>| {
            col.map(|c| {
                parse_number(&row[c]).unwrap_or_else(|r| {
                    note(r);
                    f64::NAN
                })
            })
        };
        let vf = read_opt(vf_col);
        let vv = read_opt(vv_col);
        let tv = read_opt(tv_col);

        if let Some(vf) = vf.filter(|v| v.is_finite()) {
            if rules.check_void_fraction_range && !(0.0..=1.0).contains(&vf) {
                note(DropReason::VoidFractionRange);
            }
            if let (Some(vv), Some(tv)) = (vv, tv) {
                if vv.is_finite() && tv.is_finite() {
                    match derive_void_fraction(vv, tv) {
                        Ok(ratio) => {
                            let diff = (vf - ratio).abs();
                            if diff > rules.consistency_tol * ratio.abs().max(vf.abs()) {
                                note(DropReason::VoidFractionInconsistent);
                            }
                        }
                        Err(_) => note(DropReason::VoidFractionInconsistent),
                    }
                }
            }
        }

        match worst {
            Some(reason) => drop_reasons.bump(reason),
            None => {
                kept_rows.push(row_index);
                feature_cells.push(cells);
                targets.push(y);
                analysis_values.extend(extra);
                if let Some(n) = name {
                    names.push(n);
                }
            }
        }
    }

    if kept_rows.is_empty() {
        return Err(IngestError::EmptyResult {
            input_rows: raw.n_rows(),
        });
    }

    // codebooks are built from surviving rows only
    let mut codebooks = Vec::new();
    let mut column_books: Vec<Option<usize>> = Vec::with_capacity(features.len());
    for (j, plan) in features.iter().enumerate() {
        if plan.categorical {
            let values = feature_cells.iter().map(|cells| match &cells[j] {
                Cell::Text(t) => t.trim(),
                Cell::Number(_) => unreachable!("categorical cell"),
            });
            codebooks.push(Codebook::from_values(
                map.features[j].header.clone(),
                values,
            ));
            column_books.push(Some(codebooks.len() - 1));
        } else {
            column_books.push(None);
        }
    }
    let net_book = if name_col.is_some() {
        codebooks.push(Codebook::from_values(
            NAME_FEATURES[3],
            names.iter().map(|n| n.net_code.as_str()),
        ));
        Some(codebooks.len() - 1)
    } else {
        None
    };

    let feature_names = map.output_feature_names();
    let mut feature_kinds: Vec<FeatureKind> = map.features.iter().map(|f| f.kind).collect();
    if name_col.is_some() {
        feature_kinds.extend([
            FeatureKind::Numeric,
            FeatureKind::Numeric,
            FeatureKind::Numeric,
            FeatureKind::Categorical,
            FeatureKind::Numeric,
        ]);
    }

    let n = kept_rows.len();
    let d = feature_names.len();
    let mut data = Vec::with_capacity(n * d);
    for (i, cells) in feature_cells.iter().enumerate() {
        for (cell, book) in cells.iter().zip(&column_books) {
            data.push(match (cell, book) {
                (Cell::Number(v), None) => *v,
                (Cell::Text(t), Some(b)) => {
                    codebooks[*b].code(t.trim()).expect("built from these rows") as f64
                }
                _ => unreachable!("cell kind matches column kind"),
            });
        }
        if let Some(b) = net_book {
            let nf = &names[i];
            data.push(nf.metal_units as f64);
            data.push(nf.linker1_count as f64);
            data.push(nf.linker2_count as f64);
            data.push(
                codebooks[b]
                    .code(&nf.net_code)
                    .expect("built from these rows") as f64,
            );
            data.push(nf.space_group as f64);
        }
    }

    Ok(CleanTable {
        x: Matrix::from_vec(n, d, data).expect("finite by construction"),
        y: targets,
        feature_names,
        feature_kinds,
        codebooks,
        target_name: map.target_column.clone(),
        name_column: map.name_column.clone(),
        analysis: Matrix::from_vec(n, analysis.len(), analysis_values)
            .expect("finite by construction"),
        analysis_names: map.analysis_columns.clone(),
        dropped_row_count: raw.n_rows() - n,
        kept_rows,
        input_rows: raw.n_rows(),
        drop_reasons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::FeatureColumn;

    fn table(csv: &str) -> RawTable {
        RawTable::from_reader(csv.as_bytes()).unwrap()
    }

    fn toy_map() -> ColumnMap {
        ColumnMap {
            name_column: Some("name".into()),
            target_column: "uptake".into(),
            features: vec![
                FeatureColumn::numeric("void_volume", true),
                FeatureColumn::numeric("volume", true),
                FeatureColumn::numeric("void_fraction", true),
                FeatureColumn::categorical("group"),
            ],
            analysis_columns: vec!["selectivity".into()],
            void_volume_column: Some("void_volume".into()),
            total_volume_column: Some("volume".into()),
            void_fraction_column: Some("void_fraction".into()),
        }
    }

    const TOY: &str = "\
name,void_volume,volume,void_fraction,group,uptake,selectivity
str_m1_o2_o3_pcu_sym.4,0.5,1.0,0.5,OH,1.2,10
str_m2_o2_o3_sra_sym.5,NaN,1.0,0.5,CH3,1.3,11
str_m3_o2_o3_pcu_sym.6,0.25,1.0,0.25,OH,0.7,9
str_m4_o2_o3_acs_sym.7,-0.5,1.0,0.5,NH2,1.1,12
str_m5_o2_o3_pcu_sym.8,0.1,0.5,0.2,CH3,0.9,8
";

    #[test]
    fn toy_fixture_drops_nan_and_negative() {
        let t = clean(&table(TOY), &toy_map(), &CleaningRules::default()).unwrap();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.drop_reasons.get(DropReason::Nan), 1);
        assert_eq!(t.drop_reasons.get(DropReason::Negative), 1);
        assert_eq!(t.drop_reasons.total(), 2);
        assert_eq!(t.kept_rows, vec![0, 2, 4]);
        assert_eq!(t.feature_names.len(), 9);
        // group codebook from surviving rows: CH3, OH
        assert_eq!(t.codebook("group").unwrap().categories, vec!["CH3", "OH"]);
        assert_eq!(t.x.row(0), &[0.5, 1.0, 0.5, 1.0, 1.0, 2.0, 3.0, 0.0, 4.0]);
        assert_eq!(t.codebook("net_code").unwrap().categories, vec!["pcu"]);
        assert_eq!(t.analysis.column(0), vec![10.0, 9.0, 8.0]);
    }

    #[test]
    fn clean_input_drops_nothing() {
        let raw = table(TOY).select_rows(&[0, 2, 4]);
        let t = clean(&raw, &toy_map(), &CleaningRules::default()).unwrap();
        assert_eq!(t.dropped_row_count, 0);
    }

    #[test]
    fn idempotent_and_conserving() {
        let raw = table(TOY);
        let first = clean(&raw, &toy_map(), &CleaningRules::default()).unwrap();
        assert_eq!(first.n_rows() + first.drop_reasons.total(), raw.n_rows());
        let second = clean(
            &raw.select_rows(&first.kept_rows),
            &toy_map(),
            &CleaningRules::default(),
        )
        .unwrap();
        assert_eq!(second.dropped_row_count, 0);
        assert_eq!(second.x, first.x);
    }

    #[test]
    fn void_fraction_rules() {
        let csv = "\
name,void_volume,volume,void_fraction,group,uptake,selectivity
str_m1_o1_o1_pcu_sym.1,0.5,1.0,1.5,a,1,1
str_m1_o1_o1_pcu_sym.1,0.5,1.0,0.4,a,1,1
str_m1_o1_o1_pcu_sym.1,0.5,0.0,0.4,a,1,1
str_m1_o1_o1_pcu_sym.1,0.5,1.0,0.5000000001,a,1,1
";
        let t = clean(&table(csv), &toy_map(), &CleaningRules::default()).unwrap();
        assert_eq!(t.drop_reasons.get(DropReason::VoidFractionRange), 1);
        assert_eq!(t.drop_reasons.get(DropReason::VoidFractionInconsistent), 2);
        assert_eq!(t.kept_rows, vec![3]);
    }

    #[test]
    fn empty_null_unparsable_and_bad_names() {
        let csv = "\
name,void_volume,volume,void_fraction,group,uptake,selectivity
str_m1_o1_o1_pcu_sym.1,,1.0,0.5,a,1,1
str_m1_o1_o1_pcu_sym.1,0.5,1.0,0.5,NA,1,1
str_m1_o1_o1_pcu_sym.1,0.5,1.0,0.5,a,abc,1
not_a_mof,0.5,1.0,0.5,a,1,1
str_m1_o1_o1_pcu_sym.1,0.5,1.0,0.5,a,1,inf
str_m1_o1_o1_pcu_sym.1,0.5,1.0,0.5,a,1,1
";
        let t = clean(&table(csv), &toy_map(), &CleaningRules::default()).unwrap();
        assert_eq!(t.drop_reasons.get(DropReason::Empty), 2);
        assert_eq!(t.drop_reasons.get(DropReason::Unparsable), 1);
        assert_eq!(t.drop_reasons.get(DropReason::BadName), 1);
        assert_eq!(t.drop_reasons.get(DropReason::Nan), 1);
        assert_eq!(t.n_rows(), 1);
    }

    #[test]
    fn all_rows_dropped_is_an_error() {
        let raw = table(TOY).select_rows(&[1, 3]);
        assert!(matches!(
            clean(&raw, &toy_map(), &CleaningRules::default()),
            Err(IngestError::EmptyResult { input_rows: 2 })
        ));
    }

    #[test]
    fn void_fraction_derivation() {
        assert_eq!(derive_void_fraction(0.5, 1.0).unwrap(), 0.5);
        assert_eq!(derive_void_fraction(0.0, 2.0).unwrap(), 0.0);
        assert!(matches!(
            derive_void_fraction(1.0, 0.0),
            Err(IngestError::NonPositiveTotalVolume { .. })
        ));
    }

    #[test]
    fn report_lists_every_reason() {
        let t = clean(&table(TOY), &toy_map(), &CleaningRules::default()).unwrap();
        let report = t.cleaning_report_csv();
        assert!(report.starts_with("reason,count\nempty,0\nnan,1\n"));
        assert!(report.ends_with("kept,3\ninput,5\n"));
    }
}
