use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde_json::{Map, Value};
use sle_spectrum::format::fmt17;
use sle_spectrum::{Number, Scalar};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// One output field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    /// Exact value, rendered as an integer or `p/q`.
    Exact(String),
    Float(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    pub fn number(n: &Number) -> Cell {
        match n {
            Number::Exact(_) => Cell::Exact(n.render()),
            Number::Float(x) => Cell::Float(*x),
        }
    }

    /// Exact for the rational backend, float otherwise.
    pub fn scalar<S: Scalar>(x: &S) -> Cell {
        match x.to_rational() {
            Some(r) if S::BACKEND == sle_spectrum::Backend::Rational => Cell::number(&Number::Exact(r)),
            _ => Cell::Float(x.to_f64()),
        }
    }

    pub fn opt(x: Option<f64>) -> Cell {
        x.map_or(Cell::Empty, Cell::Float)
    }

    fn csv(&self) -> String {
        match self {
            Cell::Exact(s) | Cell::Text(s) => s.clone(),
            Cell::Float(x) => fmt17(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    pub fn json(&self) -> Value {
        match self {
            Cell::Exact(s) | Cell::Text(s) => Value::String(s.clone()),
            Cell::Float(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Int(i) => Value::from(*i),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Empty => Value::Null,
        }
    }
}

pub type Row = Vec<Cell>;

pub fn open(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_csv<W: Write>(out: W, header: &[&str], rows: &[Row], extra: &[Row]) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    w.write_record(header)?;
    for row in rows.iter().chain(extra) {
        w.write_record(row.iter().map(Cell::csv))?;
    }
    w.flush()
}

pub fn row_object(header: &[&str], row: &Row) -> Value {
    let mut m = Map::new();
    for (k, c) in header.iter().zip(row) {
        m.insert((*k).to_string(), c.json());
    }
    Value::Object(m)
}

/// A JSON document starting with `schema_version` and `command`.
pub fn document(command: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
    m.insert("command".into(), Value::from(command));
    m
}

pub fn write_json<W: Write>(mut out: W, doc: Map<String, Value>) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut out, &Value::Object(doc))?;
    writeln!(out)?;
    out.flush()
}

/// A flat key/value report: one header row and one data row in CSV, an
/// object in JSON (with any nested extras appended).
pub struct Report {
    pub command: &'static str,
    pub fields: Vec<(&'static str, Cell)>,
    pub extra: Vec<(&'static str, Value)>,
}

impl Report {
    pub fn new(command: &'static str) -> Self {
        Report { command, fields: Vec::new(), extra: Vec::new() }
    }

    pub fn field(&mut self, key: &'static str, cell: Cell) -> &mut Self {
        self.fields.push((key, cell));
        self
    }

    pub fn write<W: Write>(&self, out: W, format: Format) -> io::Result<()> {
        match format {
            Format::Csv => {
                let header: Vec<&str> = self.fields.iter().map(|f| f.0).collect();
                let row: Row = self.fields.iter().map(|f| f.1.clone()).collect();
                write_csv(out, &header, &[row], &[])
            }
            Format::Json => {
                let mut doc = document(self.command);
                for (k, c) in &self.fields {
                    doc.insert((*k).to_string(), c.json());
                }
                for (k, v) in &self.extra {
                    doc.insert((*k).to_string(), v.clone());
                }
                write_json(out, doc)
            }
        }
    }
}
