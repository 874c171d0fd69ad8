//! Tabular experiment output: CSV with `#` metadata lines and a JSON sidecar.

use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version string written into every output header.
pub const VERSION: &str = env!("IRS_COVERAGE_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Int,
    Float,
    Text,
}

impl ColumnKind {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "int" => Some(ColumnKind::Int),
            "float" => Some(ColumnKind::Float),
            "text" => Some(ColumnKind::Text),
            _ => None,
        }
    }
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnKind::Int => "int",
            ColumnKind::Float => "float",
            ColumnKind::Text => "text",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    pub fn int(name: &str) -> Self {
        Column { name: name.into(), kind: ColumnKind::Int }
    }

    pub fn float(name: &str) -> Self {
        Column { name: name.into(), kind: ColumnKind::Float }
    }

    pub fn text(name: &str) -> Self {
        Column { name: name.into(), kind: ColumnKind::Text }
    }
}

/// One table cell. `Empty` marks a value that was not computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Float(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            // Debug formatting is the shortest representation that parses back exactly
            Cell::Float(x) => format!("{x:?}"),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn parse(s: &str, kind: ColumnKind) -> Result<Cell> {
        if s.is_empty() {
            return Ok(Cell::Empty);
        }
        let bad = || Error::Domain(format!("cannot parse {s:?} as {kind}"));
        Ok(match kind {
            ColumnKind::Int => Cell::Int(s.parse().map_err(|_| bad())?),
            ColumnKind::Float => Cell::Float(s.parse().map_err(|_| bad())?),
            ColumnKind::Text => Cell::Text(s.to_string()),
        })
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map_or(Cell::Empty, Into::into)
    }
}

/// A self-describing result table.
///
/// `metadata` holds ordered `(key, value)` pairs, keys may repeat (one
/// `config` entry per resolved configuration key, one `warning` per
/// warning).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
    pub metadata: Vec<(String, String)>,
}

impl ResultTable {
    pub fn new(columns: Vec<Column>) -> Self {
        ResultTable { columns, rows: Vec::new(), metadata: Vec::new() }
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the schema");
        self.rows.push(row);
    }

    pub fn add_meta(&mut self, key: &str, value: impl fmt::Display) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn warnings(&self) -> Vec<&str> {
        self.metadata.iter().filter(|(k, _)| k == "warning").map(|(_, v)| v.as_str()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// All cells of column `name`.
    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    /// Rows whose `status` column reads `fail`.
    pub fn failed_checks(&self) -> usize {
        self.column("status")
            .map(|c| c.into_iter().filter(|v| v.as_str() == Some("fail")).count())
            .unwrap_or(0)
    }

    /// Writes the `#` header followed by the CSV body.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for (k, v) in &self.metadata {
            for line in v.lines() {
                writeln!(out, "# {k}: {line}")?;
            }
        }
        let schema: Vec<String> = self.columns.iter().map(|c| format!("{}:{}", c.name, c.kind)).collect();
        writeln!(out, "# schema: {}", schema.join(","))?;
        self.write_body(out)
    }

    /// The CSV body alone (header row and data rows).
    pub fn write_body<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.columns.iter().map(|c| c.name.as_str())).map_err(io::Error::from)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io::Error::from)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// Parses the output of [`ResultTable::write_csv`].
    pub fn read_csv(text: &str) -> Result<ResultTable> {
        let mut metadata = Vec::new();
        let mut schema = None;
        let mut body = String::new();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) = rest
                    .split_once(": ")
                    .ok_or_else(|| Error::Domain(format!("malformed header line {line:?}")))?;
                if k == "schema" {
                    schema = Some(v.to_string());
                } else {
                    metadata.push((k.to_string(), v.to_string()));
                }
            } else {
                body.push_str(line);
                body.push('\n');
            }
        }
        let schema = schema.ok_or_else(|| Error::Domain("missing schema header".into()))?;
        let columns = schema
            .split(',')
            .map(|entry| {
                let (name, kind) = entry
                    .rsplit_once(':')
                    .ok_or_else(|| Error::Domain(format!("bad schema entry {entry:?}")))?;
                let kind = ColumnKind::parse(kind).ok_or_else(|| Error::Domain(format!("unknown column kind {kind:?}")))?;
                Ok(Column { name: name.to_string(), kind })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut reader = csv::Reader::from_reader(body.as_bytes());
        let header = reader.headers().map_err(io::Error::from)?.clone();
        if header.iter().ne(columns.iter().map(|c| c.name.as_str())) {
            return Err(Error::Domain("CSV header does not match the schema".into()));
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(io::Error::from)?;
            rows.push(
                record
                    .iter()
                    .zip(&columns)
                    .map(|(s, c)| Cell::parse(s, c.kind))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        Ok(ResultTable { columns, rows, metadata })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Domain(format!("JSON encoding failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<ResultTable> {
        serde_json::from_str(text).map_err(|e| Error::Domain(format!("JSON decoding failed: {e}")))
    }
}

/// Lines of a CSV document that are not `#` comments.
pub fn csv_body(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect()
}
