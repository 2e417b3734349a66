//! Layered JSON configuration: registry defaults, then the experiment
//! profile, then command-line overrides. The resolved document is hashed
//! for provenance.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Desk-scale preset used by the acceptance suite.
    Fast,
    /// Full seed sets and sweep sizes.
    Paper,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Self::Fast => "fast",
            Self::Paper => "paper",
        }
    }
}

/// Keys shared by every experiment config.
pub fn registry_defaults() -> Value {
    serde_json::json!({ "seeds": [0, 1, 2] })
}

/// Recursively overlays `top` onto `base`. Objects merge key by key; any
/// other value replaces.
pub fn merge(base: &mut Value, top: &Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                merge(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, t) => *b = t.clone(),
    }
}

/// Parses `key.path=value`. The value is read as JSON when it parses,
/// otherwise as a bare string.
pub fn parse_override(raw: &str) -> LabResult<(String, Value)> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| LabError::config(raw, "override must look like key=value"))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(LabError::config(raw, "empty key"));
    }
    let value = serde_json::from_str(value.trim()).unwrap_or_else(|_| Value::String(value.trim().to_string()));
    Ok((key.to_string(), value))
}

/// Sets a dotted path, creating intermediate objects.
pub fn set_path(doc: &mut Value, path: &str, value: Value) -> LabResult<()> {
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| LabError::config(path, format!("`{}` is not an object", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("split always yields at least one part")
}

/// Deserializes with the offending field path in the error.
pub fn typed<T: DeserializeOwned>(doc: &Value) -> LabResult<T> {
    serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        LabError::config(if path == "." { "<root>".into() } else { path }, e.into_inner().to_string())
    })
}

/// Hex sha256 of the canonical (key-sorted, compact) serialization.
pub fn config_hash(doc: &Value) -> String {
    let bytes = serde_json::to_vec(doc).expect("json values always serialize");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn merge_layers_nested_objects() {
        let mut base = json!({"a": 1, "b": {"c": 2, "d": 3}});
        merge(&mut base, &json!({"b": {"c": 20}, "e": [1]}));
        assert_eq!(base, json!({"a": 1, "b": {"c": 20, "d": 3}, "e": [1]}));
    }

    #[test]
    fn overrides_parse_json_or_string() {
        assert_eq!(parse_override("x=0.5").unwrap(), ("x".into(), json!(0.5)));
        assert_eq!(parse_override("k=gate_rotate").unwrap(), ("k".into(), json!("gate_rotate")));
        assert_eq!(parse_override("s=[1,2]").unwrap(), ("s".into(), json!([1, 2])));
        assert!(parse_override("novalue").is_err());
    }

    #[test]
    fn dotted_paths_create_objects() {
        let mut doc = json!({});
        set_path(&mut doc, "a.b.c", json!(1)).unwrap();
        assert_eq!(doc, json!({"a": {"b": {"c": 1}}}));
        let mut scalar = json!({"a": 1});
        assert!(set_path(&mut scalar, "a.b", json!(2)).is_err());
    }

    #[test]
    fn hash_ignores_insertion_order() {
        let a = json!({"x": 1, "y": 2});
        let mut b = json!({});
        set_path(&mut b, "y", json!(2)).unwrap();
        set_path(&mut b, "x", json!(1)).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_ne!(config_hash(&a), config_hash(&json!({"x": 1, "y": 3})));
    }
}
