//! `key = value` run manifests.
//!
//! One setting per line; blank lines and lines starting with `#` are
//! skipped. Keys are flag names without the leading dashes (`ratio`,
//! `loc-delta`; underscores are accepted too). Values may be wrapped in
//! double quotes.

use std::collections::BTreeMap;

/// Keys a config file may set.
pub const KEYS: [&str; 14] = [
    "ann",
    "out",
    "type",
    "ratio",
    "seed",
    "loc-delta",
    "bogus-size-policy",
    "gt",
    "dt",
    "tf",
    "tb",
    "format",
    "log",
    "threads",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
            let key = key.trim().replace('_', "-");
            if !KEYS.contains(&key.as_str()) {
                return Err(format!("line {}: unknown key `{key}`", n + 1));
            }
            let value = value.trim();
            let value = value.strip_prefix('"').and_then(|v| v.strip_suffix('"')).unwrap_or(value);
            if values.insert(key.clone(), value.to_string()).is_some() {
                return Err(format!("line {}: `{key}` is set twice", n + 1));
            }
        }
        Ok(Self { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}
