//! Report emission: CSV tables and JSON summaries with fixed float
//! formatting, so that repeated runs of the same computation produce
//! byte-identical files.

use std::path::Path;

use serde_json::{Map, Value};

use crate::Result;

/// Deterministic float rendering used in every report: scientific with a
/// fixed 12-digit mantissa (total order, no locale, no shortest-repr
/// variation).
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        // Avoid the "-0" artifact so reruns cannot disagree on the sign
        // of a zero.
        return "0.000000000000e0".to_string();
    }
    format!("{x:.12e}")
}

/// A rectangular numeric table with named columns.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Table {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    /// CSV rendering with the fixed float format; header first.
    pub fn csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Ordered key-value summary rendered to JSON. Insertion order is kept,
/// floats go through the fixed formatter (as JSON strings, so the bytes
/// are exactly the formatter's output).
#[derive(Debug, Default, Clone)]
pub struct Summary {
    entries: Vec<(String, Value)>,
}

impl Summary {
    pub fn new() -> Summary {
        Summary::default()
    }

    pub fn put_str(&mut self, key: &str, value: &str) {
        self.entries.push((key.to_string(), Value::String(value.to_string())));
    }

    pub fn put_float(&mut self, key: &str, value: f64) {
        self.entries
            .push((key.to_string(), Value::String(format_float(value))));
    }

    pub fn put_int(&mut self, key: &str, value: i64) {
        self.entries.push((key.to_string(), Value::from(value)));
    }

    pub fn put_bool(&mut self, key: &str, value: bool) {
        self.entries.push((key.to_string(), Value::from(value)));
    }

    pub fn json(&self) -> String {
        let mut map = Map::new();
        for (k, v) in &self.entries {
            map.insert(k.clone(), v.clone());
        }
        // serde_json preserves insertion order of Map (default feature);
        // pretty output with a trailing newline for clean diffs.
        let mut s = serde_json::to_string_pretty(&Value::Object(map)).expect("summary is valid JSON");
        s.push('\n');
        s
    }
}

/// Write a text file, creating parent directories as needed.
pub fn write_text(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, content)?;
    Ok(())
}
