//! Flat `key=value` configuration files; command-line flags win.

use std::collections::BTreeMap;
use std::path::Path;

pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn empty() -> Self {
        Self { values: BTreeMap::new() }
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let (key, value) = t
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected key=value, got '{t}'", i + 1))?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, String> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|e| format!("config key '{key}': {e}")),
        }
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>, String> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<usize>()
                .map(Some)
                .map_err(|e| format!("config key '{key}': {e}")),
        }
    }

    pub fn bool(&self, key: &str) -> Result<Option<bool>, String> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => match v.as_str() {
                "true" | "1" | "yes" => Ok(Some(true)),
                "false" | "0" | "no" => Ok(Some(false)),
                other => Err(format!("config key '{key}': expected a boolean, got '{other}'")),
            },
        }
    }

    pub fn string(&self, key: &str) -> Option<String> {
        self.values.get(key).cloned()
    }
}
