//! Deterministic CSV, gnuplot `.dat`, Markdown and manifest writers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::LabError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Float(v) => fmt_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }

    fn dat(&self) -> String {
        match self {
            Cell::Text(s) if s.is_empty() => "-".into(),
            Cell::Text(s) => s.replace(char::is_whitespace, "_"),
            other => other.csv(),
        }
    }
}

/// Rows under a fixed column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width differs from header");
        self.rows.push(row);
    }

    pub fn columns(&self) -> &[&'static str] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }

    /// Whitespace-separated with a `#` header; a blank line wherever `block` changes.
    pub fn to_dat(&self, block: Option<usize>) -> String {
        let mut s = format!("# {}\n", self.columns.join(" "));
        let mut last: Option<&Cell> = None;
        for row in &self.rows {
            if let Some(b) = block {
                if last.is_some_and(|c| *c != row[b]) {
                    s.push_str("\n\n");
                }
                last = Some(&row[b]);
            }
            s.push_str(&row.iter().map(Cell::dat).collect::<Vec<_>>().join(" "));
            s.push('\n');
        }
        s
    }
}

/// The output directory; remembers what was written, in order.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, LabError> {
        fs::create_dir_all(root).map_err(|source| LabError::Io { path: root.to_path_buf(), source })?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), LabError> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|source| LabError::Io { path, source })?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn csv(&mut self, name: &str, table: &Table) -> Result<(), LabError> {
        self.write(&format!("{name}.csv"), &table.to_csv())
    }

    /// CSV plus a `.dat` twin.
    pub fn csv_and_dat(&mut self, name: &str, table: &Table, block: Option<usize>) -> Result<(), LabError> {
        self.csv(name, table)?;
        self.write(&format!("{name}.dat"), &table.to_dat(block))
    }
}

/// File-name tag for a tail exponent, e.g. `g1.5`.
pub fn gamma_tag(gamma: f64) -> String {
    format!("g{gamma}")
}

/// Manifest text: command, versions, every resolved parameter, extra facts, files.
pub fn manifest(command: &str, entries: &[(&str, String)], extra: &[(String, String)], files: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "command = {command}");
    let _ = writeln!(s, "hmf_lab_version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "hmf_core_version = {}", hmf_core::VERSION);
    let _ = writeln!(s, "\n[config]");
    for (k, v) in entries {
        let _ = writeln!(s, "{k} = {v}");
    }
    if !extra.is_empty() {
        let _ = writeln!(s, "\n[derived]");
        for (k, v) in extra {
            let _ = writeln!(s, "{k} = {v}");
        }
    }
    let _ = writeln!(s, "\n[files]");
    for f in files {
        let _ = writeln!(s, "{f}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_carry_seventeen_digits() {
        assert_eq!(fmt_float(0.25), "2.5000000000000000e-1");
        let x = 0.1 + 0.2;
        assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new(&["t", "v"]);
        assert_eq!(t.to_csv(), "t,v\n");
        assert_eq!(t.to_dat(None), "# t v\n");
    }

    #[test]
    fn text_cells_are_quoted_when_needed() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["x,y".into(), "plain".into()]);
        assert_eq!(t.to_csv(), "a,b\n\"x,y\",plain\n");
    }

    #[test]
    fn dat_blocks_split_on_key_change() {
        let mut t = Table::new(&["t", "r"]);
        for (a, b) in [(1.0, 0.0), (1.0, 1.0), (2.0, 0.0)] {
            t.push(vec![a.into(), b.into()]);
        }
        let d = t.to_dat(Some(0));
        assert_eq!(d.matches("\n\n\n").count(), 1);
    }

    #[test]
    #[should_panic]
    fn ragged_rows_are_rejected() {
        Table::new(&["a"]).push(vec![1.0.into(), 2.0.into()]);
    }
}
