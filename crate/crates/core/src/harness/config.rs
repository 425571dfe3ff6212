//! `key = value` configuration files and `key: value` report text.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde_json::Value;

use crate::error::{Error, Result};

/// Parsed `key = value` lines. `#` starts a comment; blank lines are
/// ignored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected 'key = value'", n + 1)))?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(Error::config(format!("line {}: empty key", n + 1)));
            }
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::config(format!("line {}: duplicate key '{key}'", n + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.entries
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::config(format!("config key '{key}': cannot parse '{v}'")))
            })
            .transpose()
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Fails on the first key not in `allowed`.
    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        match self.entries.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::config(format!("unknown config key '{k}'; allowed: {}", allowed.join(", ")))),
            None => Ok(()),
        }
    }
}

/// Flattens a JSON object into `key: value` lines; nested keys are joined
/// with dots and arrays indexed.
pub fn key_value_text(value: &Value) -> String {
    fn walk(prefix: &str, v: &Value, out: &mut String) {
        match v {
            Value::Object(map) => {
                for (k, child) in map {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, child, out);
                }
            }
            Value::Array(items) => {
                for (i, child) in items.iter().enumerate() {
                    walk(&format!("{prefix}.{i}"), child, out);
                }
            }
            Value::String(s) => out.push_str(&format!("{prefix}: {s}\n")),
            other => out.push_str(&format!("{prefix}: {other}\n")),
        }
    }
    let mut out = String::new();
    walk("", value, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lines() {
        let kv = KeyValues::parse("# comment\nepochs = 5\n\n lr=0.001 # trailing\nname = modified\n").unwrap();
        assert_eq!(kv.get::<usize>("epochs").unwrap(), Some(5));
        assert_eq!(kv.get::<f32>("lr").unwrap(), Some(0.001));
        assert_eq!(kv.get_str("name"), Some("modified"));
        assert_eq!(kv.get::<u64>("missing").unwrap(), None);
        assert!(kv.get::<usize>("name").is_err());
        assert!(kv.reject_unknown(&["epochs", "lr", "name"]).is_ok());
        assert!(kv.reject_unknown(&["epochs"]).is_err());
    }

    #[test]
    fn malformed_lines() {
        assert!(KeyValues::parse("epochs 5").is_err());
        assert!(KeyValues::parse("= 5").is_err());
        assert!(KeyValues::parse("a = 1\na = 2").is_err());
    }

    #[test]
    fn flattens_json() {
        let v = serde_json::json!({"a": 1, "b": {"c": "x", "d": [true, 2.5]}});
        assert_eq!(key_value_text(&v), "a: 1\nb.c: x\nb.d.0: true\nb.d.1: 2.5\n");
    }
}
