//! CSV and JSON artifacts. Every file starts with the tool version and
//! the SHA-256 of the configuration bytes that produced it.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::error::{CliError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// 17 significant digits, `.` decimal separator; negative zero prints as zero.
pub fn number(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Real(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => number(*v),
            Cell::Text(s) if s.contains([',', '"', '\n', '\r']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// RFC 4180 body with CRLF line ends, preceded by `#` provenance lines.
    pub fn render(&self, config_hash: &str) -> String {
        let mut out = format!("# maclim {VERSION}\r\n# config_sha256 {config_hash}\r\n");
        out.push_str(&self.columns.join(","));
        out.push_str("\r\n");
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            let _ = write!(out, "{}\r\n", cells.join(","));
        }
        out
    }
}

pub fn render_json(body: Value, config_hash: &str) -> String {
    let doc = json!({
        "tool": "maclim",
        "version": VERSION,
        "config_sha256": config_hash,
        "result": body,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("json values serialize");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Csv { file: String, table: Table },
    Json { file: String, body: Value },
}

/// Writes every artifact; the directory is created only here, after all
/// computation has succeeded.
pub fn write_all(dir: &Path, artifacts: &[Artifact], config_hash: &str) -> Result<Vec<std::path::PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    for a in artifacts {
        let (file, text) = match a {
            Artifact::Csv { file, table } => (file, table.render(config_hash)),
            Artifact::Json { file, body } => (file, render_json(body.clone(), config_hash)),
        };
        let path = dir.join(file);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Finite reals as JSON numbers, everything else as strings.
pub fn real(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or_else(|| Value::String(x.to_string()), Value::Number)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_seventeen_digits() {
        assert_eq!(number(0.1), "1.0000000000000001e-1");
        assert_eq!(number(-2.0), "-2.0000000000000000e0");
        assert_eq!(number(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(number(-0.0), number(0.0));
    }

    #[test]
    fn text_cells_are_quoted() {
        assert_eq!(Cell::Text("a,b".into()).render(), "\"a,b\"");
        assert_eq!(Cell::Text("say \"x\"".into()).render(), "\"say \"\"x\"\"\"");
    }

    #[test]
    fn table_has_header_lines() {
        let mut t = Table::new(vec!["a", "b"]);
        t.push(vec![Cell::Int(1), Cell::Real(0.5)]);
        let s = t.render("abc");
        assert!(s.starts_with("# maclim "));
        assert!(s.contains("# config_sha256 abc\r\na,b\r\n1,5.0000000000000000e-1\r\n"));
    }
}
