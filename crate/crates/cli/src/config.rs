//! Config files merged with command-line overrides.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

/// Dotted config keys set from flags, applied over the config file.
#[derive(Default)]
pub struct Overrides(Vec<(&'static str, Value)>);

impl Overrides {
    pub fn set(&mut self, key: &'static str, value: impl Serialize) -> &mut Self {
        self.0.push((key, serde_json::to_value(value).expect("serializable override")));
        self
    }

    pub fn opt<T: Serialize>(&mut self, key: &'static str, value: Option<T>) -> &mut Self {
        if let Some(v) = value {
            self.set(key, v);
        }
        self
    }
}

/// Reads a JSON or YAML document; the extension picks the parser and
/// anything other than `.json` is read as YAML.
pub fn load_document(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let value: Value = if is_json {
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
    } else {
        serde_yaml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
    };
    match value {
        Value::Object(_) => Ok(value),
        Value::Null => Ok(Value::Object(Map::new())),
        _ => Err(CliError::Usage(format!("{}: config must be a mapping", path.display()))),
    }
}

pub fn set_path(root: &mut Value, key: &str, value: Value) {
    let mut node = root;
    let mut parts = key.split('.').peekable();
    while let Some(part) = parts.next() {
        if !node.is_object() {
            *node = Value::Object(Map::new());
        }
        let map = node.as_object_mut().expect("object");
        if parts.peek().is_none() {
            map.insert(part.to_string(), value);
            return;
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
}

pub fn has_path(root: &Value, key: &str) -> bool {
    let mut node = root;
    for part in key.split('.') {
        match node.get(part) {
            Some(v) => node = v,
            None => return false,
        }
    }
    !node.is_null()
}

/// Merged document before typing; callers may fill derived defaults.
pub fn merge(config: Option<&Path>, overrides: &Overrides) -> Result<Value, CliError> {
    let mut doc = match config {
        Some(path) => load_document(path)?,
        None => Value::Object(Map::new()),
    };
    for (key, value) in &overrides.0 {
        set_path(&mut doc, key, value.clone());
    }
    Ok(doc)
}

/// Types the merged document and prints it, fully resolved, to stdout.
pub fn finish<T: DeserializeOwned + Serialize>(command: &str, doc: Value) -> Result<T, CliError> {
    let resolved: T =
        serde_json::from_value(doc).map_err(|e| CliError::Usage(format!("invalid {command} config: {e}")))?;
    let text = serde_json::to_string_pretty(&resolved).expect("serializable config");
    println!("resolved {command} config:\n{text}");
    Ok(resolved)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_keys_are_created_and_replaced() {
        let mut doc = serde_json::json!({"train": {"lr": 0.1, "epochs": 3}});
        set_path(&mut doc, "train.lr", Value::from(0.0));
        set_path(&mut doc, "head.dropout", Value::from(0.2));
        assert_eq!(doc, serde_json::json!({"train": {"lr": 0.0, "epochs": 3}, "head": {"dropout": 0.2}}));
        assert!(has_path(&doc, "head.dropout"));
        assert!(!has_path(&doc, "head.hidden"));
    }
}
