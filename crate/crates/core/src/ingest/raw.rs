use std::io::Read;
use std::path::Path;

use super::{ColumnMap, IngestError};

/// CSV contents as verbatim strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn new(headers: Vec<String>, rows: Vec<Vec<String>>) -> Result<Self, IngestError> {
        let mut seen = std::collections::HashSet::new();
        for h in &headers {
            if !seen.insert(h) {
                return Err(IngestError::DuplicateHeader { column: h.clone() });
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != headers.len() {
                return Err(IngestError::RaggedRow {
                    line: i as u64 + 2,
                    expected: headers.len(),
                    found: row.len(),
                });
            }
        }
        Ok(RawTable { headers, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.headers.len()
    }

    pub fn column_index(&self, header: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == header)
    }

    pub fn select_rows(&self, indices: &[usize]) -> RawTable {
        RawTable {
            headers: self.headers.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Parses RFC-4180 CSV with a mandatory header row.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, IngestError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| IngestError::Csv(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if headers.is_empty() {
            return Err(IngestError::Csv("missing header row".into()));
        }
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| IngestError::Csv(e.to_string()))?;
            if record.len() != headers.len() {
                return Err(IngestError::RaggedRow {
                    line: record.position().map_or(0, |p| p.line()),
                    expected: headers.len(),
                    found: record.len(),
                });
            }
            rows.push(record.iter().map(str::to_string).collect());
        }
        RawTable::new(headers, rows)
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

/// Reads `path` and checks that every header referenced by `map` is present.
pub fn load_csv(path: &Path, map: &ColumnMap) -> Result<RawTable, IngestError> {
    if !path.exists() {
        return Err(IngestError::MissingFile {
            path: path.display().to_string(),
        });
    }
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let raw = RawTable::from_reader(std::io::BufReader::new(file))?;
    map.validate_headers(&raw.headers)?;
    Ok(raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::FeatureColumn;

    fn map(features: &[&str]) -> ColumnMap {
        ColumnMap {
            name_column: None,
            target_column: "y".into(),
            features: features
                .iter()
                .map(|f| FeatureColumn::numeric(*f, false))
                .collect(),
            analysis_columns: vec![],
            void_volume_column: None,
            total_volume_column: None,
            void_fraction_column: None,
        }
    }

    fn write(contents: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn counts_data_rows() {
        let f = write("a,y\n1,2\n3,4\n");
        let raw = load_csv(f.path(), &map(&["a"])).unwrap();
        assert_eq!((raw.n_rows(), raw.n_cols()), (2, 2));
        assert_eq!(raw.rows[1], vec!["3", "4"]);
    }

    #[test]
    fn keeps_cells_verbatim() {
        let f = write("a,y\n\" 1.50 \",NaN\n");
        let raw = load_csv(f.path(), &map(&["a"])).unwrap();
        assert_eq!(raw.rows[0], vec![" 1.50 ", "NaN"]);
    }

    #[test]
    fn ragged_row_reports_line() {
        let f = write("a,b,y\n1,2,3\n1,2,3\n1,2,3\n1,2,3\n1,2\n1,2,3\n");
        match load_csv(f.path(), &map(&["a"])) {
            Err(IngestError::RaggedRow {
                line,
                expected,
                found,
            }) => {
                assert_eq!((line, expected, found), (6, 3, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_header_is_reported() {
        let f = write("a,y\n1,2\n");
        assert!(matches!(
            load_csv(f.path(), &map(&["a", "b"])),
            Err(IngestError::MissingColumn { column }) if column == "b"
        ));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_csv(Path::new("/nonexistent/data.csv"), &map(&["a"])),
            Err(IngestError::MissingFile { .. })
        ));
    }

    #[test]
    fn duplicate_headers_rejected() {
        assert!(matches!(
            RawTable::from_reader("a,a\n1,2\n".as_bytes()),
            Err(IngestError::DuplicateHeader { .. })
        ));
    }
}
