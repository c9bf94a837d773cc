//! Optional JSON config file: a flat object whose keys are long flag names.
//! Explicit command-line flags always win over config values.

use std::path::{Path, PathBuf};

pub struct Config {
    values: serde_json::Map<String, serde_json::Value>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let Some(path) = path else {
            return Ok(Config {
                values: serde_json::Map::new(),
            });
        };
        let raw = std::fs::read_to_string(path)
            .map_err(|e| format!("config {}: {e}", path.display()))?;
        let value: serde_json::Value = serde_json::from_str(&raw)
            .map_err(|e| format!("config {}: {e}", path.display()))?;
        match value {
            serde_json::Value::Object(values) => Ok(Config { values }),
            _ => Err(format!("config {}: expected a JSON object", path.display())),
        }
    }

    pub fn string(&self, key: &str) -> Option<String> {
        match self.values.get(key)? {
            serde_json::Value::String(s) => Some(s.clone()),
            serde_json::Value::Number(n) => Some(n.to_string()),
            _ => None,
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.string(key).map(PathBuf::from)
    }

    /// A list-valued key: a JSON array of strings, or one comma-separated string.
    pub fn paths(&self, key: &str) -> Vec<PathBuf> {
        match self.values.get(key) {
            Some(serde_json::Value::Array(items)) => items
                .iter()
                .filter_map(|v| v.as_str())
                .map(PathBuf::from)
                .collect(),
            Some(serde_json::Value::String(s)) => s
                .split(',')
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .map(PathBuf::from)
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn u64(&self, key: &str) -> Option<u64> {
        match self.values.get(key)? {
            serde_json::Value::Number(n) => n.as_u64(),
            serde_json::Value::String(s) => s.parse().ok(),
            _ => None,
        }
    }

    pub fn usize(&self, key: &str) -> Option<usize> {
        self.u64(key).map(|v| v as usize)
    }

    pub fn bool(&self, key: &str) -> Option<bool> {
        self.values.get(key)?.as_bool()
    }
}
