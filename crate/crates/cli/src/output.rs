//! Tabular results and their CSV / JSON serialization.
//!
//! Floats are written with 17 significant digits so that parsing the text
//! reproduces the in-memory value exactly. Non-finite floats are written as
//! `inf`, `-inf` or `nan` (JSON strings).

use std::io::{self, Write};

use clap::ValueEnum;
use serde_json::{Map, Number, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i128),
    Float(f64),
    Bool(bool),
    Text(String),
    Null,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Null, Cell::Float)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i128)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i128)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
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

pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => {
                format!("\"{}\"", s.replace('"', "\"\""))
            }
            Cell::Text(s) => s.clone(),
            Cell::Null => String::new(),
        }
    }

    pub fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::Number(v.to_string().parse().expect("integer literal")),
            Cell::Float(v) if v.is_finite() => {
                Value::Number(format_float(*v).parse::<Number>().expect("float literal"))
            }
            Cell::Float(v) => Value::String(format_float(*v)),
            Cell::Bool(v) => Value::Bool(*v),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Null => Value::Null,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// A finished command result: metadata plus rows.
pub struct Document {
    pub meta: Map<String, Value>,
    pub table: Table,
}

impl Document {
    pub fn write(&self, format: Format, out: &mut dyn Write) -> io::Result<()> {
        match format {
            Format::Csv => {
                writeln!(out, "{}", self.table.columns.join(","))?;
                for row in &self.table.rows {
                    let line: Vec<String> = row.iter().map(Cell::csv).collect();
                    writeln!(out, "{}", line.join(","))?;
                }
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .table
                    .rows
                    .iter()
                    .map(|row| {
                        Value::Object(
                            self.table
                                .columns
                                .iter()
                                .cloned()
                                .zip(row.iter().map(Cell::json))
                                .collect(),
                        )
                    })
                    .collect();
                let mut doc = Map::new();
                doc.insert("meta".into(), Value::Object(self.meta.clone()));
                doc.insert("rows".into(), Value::Array(rows));
                serde_json::to_writer_pretty(&mut *out, &Value::Object(doc))?;
                writeln!(out)?;
            }
        }
        Ok(())
    }
}
