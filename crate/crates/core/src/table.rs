//! CSV output: header row, LF endings, reals at 17 significant digits so
//! values survive a write/read cycle bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Real,
    Integer,
    Bool,
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    pub fn real(name: &str) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Real,
        }
    }
    pub fn integer(name: &str) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Integer,
        }
    }
    pub fn bool(name: &str) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Bool,
        }
    }
    pub fn text(name: &str) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Text,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Integer(i64),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn kind(&self) -> ColumnKind {
        match self {
            Cell::Real(_) => ColumnKind::Real,
            Cell::Integer(_) => ColumnKind::Integer,
            Cell::Bool(_) => ColumnKind::Bool,
            Cell::Text(_) => ColumnKind::Text,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Integer(v)
    }
}

fn plain(s: &str) -> bool {
    !s.contains([',', '"', '\n', '\r'])
}

/// Renders `rows` as CSV text, rejecting rows that do not match `schema`.
pub fn format_table(schema: &[Column], rows: &[Vec<Cell>]) -> Result<String> {
    if schema.is_empty() {
        return Err(Error::Schema("empty schema".into()));
    }
    if let Some(c) = schema.iter().find(|c| c.name.is_empty() || !plain(&c.name)) {
        return Err(Error::Schema(format!("bad column name {:?}", c.name)));
    }
    let mut out = String::new();
    let names: Vec<&str> = schema.iter().map(|c| c.name.as_str()).collect();
    out.push_str(&names.join(","));
    out.push('\n');
    for (i, row) in rows.iter().enumerate() {
        if row.len() != schema.len() {
            return Err(Error::Schema(format!(
                "row {i} has {} cells, schema has {} columns",
                row.len(),
                schema.len()
            )));
        }
        for (j, (cell, col)) in row.iter().zip(schema).enumerate() {
            if cell.kind() != col.kind {
                return Err(Error::Schema(format!(
                    "row {i}, column `{}`: expected {:?}, got {:?}",
                    col.name,
                    col.kind,
                    cell.kind()
                )));
            }
            if j > 0 {
                out.push(',');
            }
            match cell {
                Cell::Real(v) => write!(out, "{v:.16e}").expect("string write"),
                Cell::Integer(v) => write!(out, "{v}").expect("string write"),
                Cell::Bool(v) => write!(out, "{v}").expect("string write"),
                Cell::Text(s) => {
                    if !plain(s) {
                        return Err(Error::Schema(format!(
                            "row {i}, column `{}`: text may not contain separators",
                            col.name
                        )));
                    }
                    out.push_str(s);
                }
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Writes `rows` to `path` as CSV.
pub fn emit_table(path: &Path, schema: &[Column], rows: &[Vec<Cell>]) -> Result<()> {
    let text = format_table(schema, rows)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Parsed CSV: header names and raw cell strings.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Column `name` parsed as reals.
    pub fn reals(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .column(name)
            .ok_or_else(|| Error::Schema(format!("no column `{name}`")))?;
        self.rows
            .iter()
            .map(|r| {
                r[j].parse::<f64>()
                    .map_err(|e| Error::Schema(format!("column `{name}`: {e}")))
            })
            .collect()
    }
}

pub fn parse_table(text: &str) -> Result<RawTable> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Schema("missing header".into()))?
        .split(',')
        .map(str::to_owned)
        .collect();
    let rows = lines
        .map(|l| {
            let cells: Vec<String> = l.split(',').map(str::to_owned).collect();
            if cells.len() != header.len() {
                return Err(Error::Schema(format!("ragged row {l:?}")));
            }
            Ok(cells)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RawTable { header, rows })
}

pub fn read_table(path: &Path) -> Result<RawTable> {
    parse_table(&std::fs::read_to_string(path)?)
}
