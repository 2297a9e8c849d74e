//! Run configuration: flat `key = value` text with one level of
//! `[section]` headers.
//!
//! Keys are addressed by their full dotted name (`modulus.alpha`); a key
//! written inside `[modulus]` as `alpha = 0.5` gets that name
//! automatically, and a key containing a dot is taken as absolute
//! regardless of the current section. Values stay uninterpreted strings
//! until a typed getter parses them; every parse failure reports the line
//! the key was defined on. `#` and `;` start comment lines.

use std::collections::HashMap;
use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    /// 1-based source line; 0 for programmatic overrides.
    line: usize,
}

/// Parsed configuration: ordered entries plus a key index.
#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: Vec<Entry>,
    index: HashMap<String, usize>,
}

fn valid_key_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.'
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut cfg = Config::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return Err(Error::config(format!(
                        "line {line_no}: unterminated section header `{line}`"
                    )));
                };
                let name = name.trim();
                if name.is_empty() || !name.chars().all(valid_key_char) || name.contains('.') {
                    return Err(Error::config(format!(
                        "line {line_no}: invalid section name `{name}`"
                    )));
                }
                section = name.to_string();
                continue;
            }
            let Some((key_part, value_part)) = line.split_once('=') else {
                return Err(Error::config(format!(
                    "line {line_no}: expected `key = value`, got `{line}`"
                )));
            };
            let key_local = key_part.trim();
            let value = value_part.trim();
            if key_local.is_empty() || !key_local.chars().all(valid_key_char) {
                return Err(Error::config(format!(
                    "line {line_no}: invalid key `{key_local}`"
                )));
            }
            let key = if key_local.contains('.') || section.is_empty() {
                key_local.to_string()
            } else {
                format!("{section}.{key_local}")
            };
            if let Some(&prev) = cfg.index.get(&key) {
                return Err(Error::config(format!(
                    "line {line_no}: duplicate key `{key}` (first defined on line {})",
                    cfg.entries[prev].line
                )));
            }
            cfg.index.insert(key.clone(), cfg.entries.len());
            cfg.entries.push(Entry {
                key,
                value: value.to_string(),
                line: line_no,
            });
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    /// Canonical flat rendering: absolute `key = value` lines in definition
    /// order. Parsing the rendering reproduces the same keys and values.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.key);
            out.push_str(" = ");
            out.push_str(&e.value);
            out.push('\n');
        }
        out
    }

    /// Insert or override a key (full dotted name) programmatically.
    pub fn set(&mut self, key: &str, value: &str) {
        if let Some(&i) = self.index.get(key) {
            self.entries[i].value = value.to_string();
        } else {
            self.index.insert(key.to_string(), self.entries.len());
            self.entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line: 0,
            });
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.index.get(key).map(|&i| self.entries[i].value.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.key.as_str())
    }

    /// Reject keys outside the given vocabulary, naming the first offender
    /// and its line.
    pub fn check_known(&self, known: &[&str]) -> Result<()> {
        for e in &self.entries {
            if !known.contains(&e.key.as_str()) {
                return Err(Error::config(format!(
                    "line {}: unknown key `{}`",
                    e.line, e.key
                )));
            }
        }
        Ok(())
    }

    fn parse_at<T: std::str::FromStr>(&self, key: &str, kind: &str) -> Result<Option<T>> {
        let Some(&i) = self.index.get(key) else {
            return Ok(None);
        };
        let e = &self.entries[i];
        e.value.parse::<T>().map(Some).map_err(|_| {
            Error::config(format!(
                "line {}: key `{key}` needs a {kind}, got `{}`",
                e.line, e.value
            ))
        })
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        self.parse_at(key, "number")
    }

    pub fn u64_opt(&self, key: &str) -> Result<Option<u64>> {
        self.parse_at(key, "nonnegative integer")
    }

    pub fn usize_opt(&self, key: &str) -> Result<Option<usize>> {
        self.parse_at(key, "nonnegative integer")
    }

    pub fn bool_opt(&self, key: &str) -> Result<Option<bool>> {
        self.parse_at(key, "boolean (true/false)")
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        Ok(self.u64_opt(key)?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.usize_opt(key)?.unwrap_or(default))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        Ok(self.bool_opt(key)?.unwrap_or(default))
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.get(key).unwrap_or(default)
    }
}
