//! Table writer: CSV with a self-describing `#` metadata header, or JSON.
//!
//! Output is byte-stable for a fixed configuration and seed: rows are
//! generated in index order and floats use Rust's shortest round-trip
//! formatting.

use crate::config::Format;
use std::io::Write;
use std::path::Path;

pub struct Table {
    pub meta: serde_json::Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Trailing `#`-prefixed summary lines (CSV only).
    pub trailer: Vec<String>,
}

impl Table {
    pub fn new(meta: serde_json::Value, columns: &[&str]) -> Self {
        Table {
            meta,
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            trailer: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn render_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("# ");
        out.push_str(&self.meta.to_string());
        out.push('\n');
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        for line in &self.trailer {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out
    }

    fn render_json(&self) -> String {
        let value = serde_json::json!({
            "meta": self.meta,
            "columns": self.columns,
            "rows": self.rows,
            "summary": self.trailer,
        });
        let mut text = serde_json::to_string_pretty(&value).expect("table serialization");
        text.push('\n');
        text
    }

    /// Writes to the path or stdout; one serialized write.
    pub fn write(&self, out: Option<&Path>, format: Format) -> std::io::Result<()> {
        let text = match format {
            Format::Csv => self.render_csv(),
            Format::Json => self.render_json(),
        };
        match out {
            Some(path) => std::fs::write(path, text),
            None => {
                let stdout = std::io::stdout();
                let mut lock = stdout.lock();
                lock.write_all(text.as_bytes())
            }
        }
    }
}

/// Canonical float formatting (shortest round-trip, stable across runs).
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub fn fmt_complex(z: num_complex::Complex64) -> (String, String) {
    (fmt_f64(z.re), fmt_f64(z.im))
}
