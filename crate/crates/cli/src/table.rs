//! Tabular output. Floats are written with 17 significant digits in
//! lowercase scientific notation so that identical runs give identical bytes.

use std::io::Write;
use std::path::Path;

use serde_json::{Map, Number, Value};

use crate::config::{Format, RunConfig};
use crate::CliError;

pub const TOOL: &str = "tbscatter";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Bool(bool),
    Text(String),
    /// Several values in one cell, `;`-separated in CSV.
    List(Vec<f64>),
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

fn json_num(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(fmt_f64(x).parse::<Number>().expect("formatted float is a JSON number"))
    } else {
        Value::Null
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => fmt_f64(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::List(xs) => xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(";"),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => json_num(*x),
            Cell::Int(n) => Value::from(*n),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::List(xs) => Value::Array(xs.iter().map(|&x| json_num(x)).collect()),
        }
    }
}

/// A finished result: column names, rows, and free-form notes that are
/// written after the config echo.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub command: &'static str,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(command: &'static str, columns: &[&str]) -> Self {
        Table { command, columns: columns.iter().map(|c| c.to_string()).collect(), ..Default::default() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, config: &RunConfig, format: Format) -> String {
        match format {
            Format::Csv => self.render_csv(config),
            Format::Json => self.render_json(config),
        }
    }

    fn render_csv(&self, config: &RunConfig) -> String {
        let mut out = format!("# {TOOL} {VERSION} {}\n", self.command);
        out.push_str("# config:\n");
        for line in config.to_toml().lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        for note in &self.notes {
            out.push_str("# note: ");
            out.push_str(note);
            out.push('\n');
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    fn render_json(&self, config: &RunConfig) -> String {
        let mut doc = Map::new();
        doc.insert("tool".into(), Value::from(TOOL));
        doc.insert("version".into(), Value::from(VERSION));
        doc.insert("command".into(), Value::from(self.command));
        doc.insert("config".into(), serde_json::to_value(config).expect("config serializes"));
        doc.insert("notes".into(), Value::from(self.notes.clone()));
        doc.insert("columns".into(), Value::from(self.columns.clone()));
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self.columns.iter().cloned().zip(row.iter().map(Cell::json)).collect();
                Value::Object(obj)
            })
            .collect();
        doc.insert("rows".into(), Value::Array(rows));
        let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("json renders");
        s.push('\n');
        s
    }
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
