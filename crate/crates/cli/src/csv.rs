//! CSV emission with a `#` metadata header.

use std::fmt::Write as _;

/// Locale-independent number formatting.
///
/// Magnitudes below `1e-3` (and very large ones) use exponent notation;
/// everything else the shortest round-trip decimal form.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if !x.is_finite() {
        x.to_string()
    } else if x.abs() < 1e-3 || x.abs() >= 1e15 {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// A cell value.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Self::Float(x) => format_float(*x),
            Self::Int(n) => n.to_string(),
            Self::Text(s) => s.clone(),
            Self::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Self::Float(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Self::Text(s.to_string())
    }
}

/// Metadata every output file carries.
#[derive(Clone, Debug)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
}

/// An in-memory CSV document, written in one piece.
#[derive(Clone, Debug)]
pub struct CsvDoc {
    text: String,
    columns: usize,
}

impl CsvDoc {
    pub fn new(meta: &Provenance, extra: &[(&str, String)], columns: &[&str]) -> Self {
        let mut text = String::new();
        writeln!(text, "# schema_version: {}", crate::config::SCHEMA_VERSION).unwrap();
        writeln!(text, "# command: {}", meta.command).unwrap();
        writeln!(text, "# config_sha256: {}", meta.config_hash).unwrap();
        writeln!(text, "# seed: {}", meta.seed).unwrap();
        for (k, v) in extra {
            writeln!(text, "# {k}: {v}").unwrap();
        }
        text.push_str(&columns.join(","));
        text.push('\n');
        Self {
            text,
            columns: columns.len(),
        }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        assert_eq!(cells.len(), self.columns, "row width must match the header");
        let rendered: Vec<String> = cells.iter().map(Cell::render).collect();
        self.text.push_str(&rendered.join(","));
        self.text.push('\n');
    }

    /// Trailing `#` line, for summaries computed after the rows.
    pub fn comment(&mut self, line: &str) {
        self.text.push_str("# ");
        self.text.push_str(line);
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}
