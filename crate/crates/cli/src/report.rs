//! Tabular results and their CSV / JSON encodings.
//!
//! Floats are written in scientific notation with 17 significant digits,
//! which round-trips every `f64`. Both encoders are pure functions of the
//! report, so identical inputs give identical bytes.

use std::io::{self, Write};

use serde_json::{Map, Value as Json};

use crate::config::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Str(String),
    Float(f64),
    Int(u64),
    Empty,
}

impl Cell {
    pub fn str(s: impl Into<String>) -> Self {
        Cell::Str(s.into())
    }

    pub fn opt(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Float)
    }

    fn text(&self) -> String {
        match self {
            Cell::Str(s) => s.clone(),
            Cell::Float(x) => format_float(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Json {
        match self {
            Cell::Str(s) => Json::String(s.clone()),
            // arbitrary-precision numbers keep the exact digits written here
            Cell::Float(x) if x.is_finite() => Json::Number(format_float(*x).parse().expect("float literal is valid JSON")),
            Cell::Float(_) | Cell::Empty => Json::Null,
            Cell::Int(n) => Json::from(*n),
        }
    }
}

/// `1.2345678901234567e-3`; `NaN`, `inf` and `-inf` for non-finite values.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Report {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::text))?;
        }
        w.flush()
    }

    /// `{"columns": [...], "rows": [{column: value, ...}, ...]}` with keys in
    /// column order.
    pub fn write_json<W: Write>(&self, mut out: W) -> io::Result<()> {
        let rows: Vec<Json> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = Map::new();
                for (k, cell) in self.columns.iter().zip(row) {
                    obj.insert(k.clone(), cell.json());
                }
                Json::Object(obj)
            })
            .collect();
        let mut doc = Map::new();
        doc.insert("columns".into(), Json::from(self.columns.clone()));
        doc.insert("rows".into(), Json::Array(rows));
        serde_json::to_writer_pretty(&mut out, &Json::Object(doc))?;
        out.write_all(b"\n")
    }

    pub fn write<W: Write>(&self, format: Format, out: W) -> io::Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
        }
    }

    pub fn to_bytes(&self, format: Format) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write(format, &mut buf).expect("writing to memory");
        buf
    }

    /// Cell by row index and column name.
    pub fn get(&self, row: usize, column: &str) -> Option<&Cell> {
        let k = self.columns.iter().position(|c| c == column)?;
        self.rows.get(row).map(|r| &r[k])
    }
}
