//! Table rendering. Floats are written with 17 significant digits in both
//! formats, so every value round-trips exactly.

use std::io::{self, Write};

use serde_json::ser::{CompactFormatter, Formatter};
use serde_json::{Map, Value};

use crate::config::{ExperimentConfig, Format, HEADER_MARKER};
use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
    Empty,
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(u64::from(v))
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(if v { "PASS" } else { "FAIL" }.to_owned())
    }
}

pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".to_owned()
    } else if v > 0.0 {
        "inf".to_owned()
    } else {
        "-inf".to_owned()
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Row {
    pub cells: Vec<Cell>,
    /// Fields that only the JSON format carries.
    pub details: Vec<(&'static str, Value)>,
}

impl Row {
    pub fn new(cells: Vec<Cell>) -> Self {
        Self {
            cells,
            details: Vec::new(),
        }
    }

    pub fn with_detail(mut self, name: &'static str, value: impl serde::Serialize) -> Self {
        self.details.push((name, serde_json::to_value(value).expect("detail serializes")));
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub command: &'static str,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

/// `serde_json` formatter that writes floats like the CSV output.
struct SignificantDigits(CompactFormatter);

impl Formatter for SignificantDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_float(value).as_bytes())
    }
}

pub fn header_line(command: &str, config: &ExperimentConfig) -> String {
    format!("# molcomm {VERSION} {command}{HEADER_MARKER}{}", config.to_json())
}

pub fn render(table: &Table, config: &ExperimentConfig) -> Result<Vec<u8>, CliError> {
    match config.format {
        Format::Csv => render_csv(table, config),
        Format::Json => render_json(table, config),
    }
}

fn render_csv(table: &Table, config: &ExperimentConfig) -> Result<Vec<u8>, CliError> {
    let mut out = header_line(table.command, config).into_bytes();
    out.push(b'\n');
    let mut w = csv::WriterBuilder::new().flexible(false).from_writer(out);
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.cells.iter().map(Cell::csv))?;
    }
    w.into_inner().map_err(|e| CliError::Write(e.into_error()))
}

fn render_json(table: &Table, config: &ExperimentConfig) -> Result<Vec<u8>, CliError> {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|row| {
            let mut obj = Map::new();
            for (name, cell) in table.columns.iter().zip(&row.cells) {
                if *cell != Cell::Empty {
                    obj.insert(name.clone(), cell.json());
                }
            }
            for (name, value) in &row.details {
                obj.insert((*name).to_owned(), value.clone());
            }
            Value::Object(obj)
        })
        .collect();
    let doc = serde_json::json!({
        "tool": "molcomm",
        "version": VERSION,
        "command": table.command,
        "config": serde_json::to_value(config).expect("config serializes"),
        "columns": table.columns,
        "rows": rows,
    });
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SignificantDigits(CompactFormatter));
    serde::Serialize::serialize(&doc, &mut ser).map_err(io::Error::from)?;
    out.push(b'\n');
    Ok(out)
}
