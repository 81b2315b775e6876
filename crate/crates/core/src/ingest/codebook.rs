use serde::{Deserialize, Serialize};

/// Label encoding for one categorical column: the code of a category is its
/// index in byte-lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codebook {
    pub column: String,
    pub categories: Vec<String>,
}

impl Codebook {
    pub fn from_values<I, S>(column: impl Into<String>, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut categories: Vec<String> =
            values.into_iter().map(|s| s.as_ref().to_string()).collect();
        categories.sort_unstable();
        categories.dedup();
        Codebook {
            column: column.into(),
            categories,
        }
    }

    pub fn code(&self, category: &str) -> Option<usize> {
        self.categories
            .binary_search_by(|c| c.as_str().cmp(category))
            .ok()
    }

    pub fn decode(&self, code: usize) -> Option<&str> {
        self.categories.get(code).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    /// Structural check used when loading persisted codebooks.
    pub fn is_well_formed(&self) -> bool {
        self.categories.windows(2).all(|w| w[0] < w[1])
    }
}

pub fn encode_labels<S: AsRef<str>>(column_name: &str, column: &[S]) -> (Vec<usize>, Codebook) {
    let book = Codebook::from_values(column_name, column.iter().map(AsRef::as_ref));
    let codes = column
        .iter()
        .map(|v| book.code(v.as_ref()).expect("category collected above"))
        .collect();
    (codes, book)
}
