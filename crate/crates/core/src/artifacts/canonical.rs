use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value};

use super::bundle::{ModelBundle, SCHEMA_VERSION};
use super::ArtifactError;

fn sort_keys(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut sorted = Map::new();
            for (k, v) in entries {
                sorted.insert(k, sort_keys(v));
            }
            Value::Object(sorted)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

/// Compact JSON with recursively sorted object keys and shortest
/// round-trip float formatting, followed by a newline.
pub fn to_canonical_json(bundle: &ModelBundle) -> Result<String, ArtifactError> {
    bundle.validate()?;
    let value =
        serde_json::to_value(bundle).map_err(|e| ArtifactError::CorruptBundle(e.to_string()))?;
    let mut text = serde_json::to_string(&sort_keys(value))
        .map_err(|e| ArtifactError::CorruptBundle(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a partial bundle.
pub fn save_bundle(bundle: &ModelBundle, path: &Path) -> Result<(), ArtifactError> {
    let text = to_canonical_json(bundle)?;
    let io = |source| ArtifactError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(text.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle, ArtifactError> {
    let bytes = fs::read(path).map_err(|source| ArtifactError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_bundle(&bytes)
}

pub(crate) fn parse_bundle(bytes: &[u8]) -> Result<ModelBundle, ArtifactError> {
    let value: Value =
        serde_json::from_slice(bytes).map_err(|e| ArtifactError::CorruptBundle(e.to_string()))?;
    let version = value
        .get("schema_version")
        .ok_or_else(|| ArtifactError::CorruptBundle("missing schema_version".into()))?
        .as_u64()
        .ok_or_else(|| {
            ArtifactError::CorruptBundle("schema_version is not an unsigned integer".into())
        })?;
    if version != SCHEMA_VERSION {
        return Err(ArtifactError::SchemaVersionMismatch {
            found: version,
            expected: SCHEMA_VERSION,
        });
    }
    let bundle: ModelBundle =
        serde_json::from_value(value).map_err(|e| ArtifactError::CorruptBundle(e.to_string()))?;
    bundle.validate()?;
    Ok(bundle)
}
