use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// A single cell of an output table.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Int(i64),
    Seed(u64),
    Real(f64),
    Text(String),
    Bool(bool),
    Missing,
}

impl Field {
    pub fn opt_real(v: Option<f64>) -> Self {
        v.map_or(Field::Missing, Field::Real)
    }

    pub fn as_real(&self) -> Option<f64> {
        match *self {
            Field::Real(v) => Some(v),
            Field::Int(v) => Some(v as f64),
            _ => None,
        }
    }

    fn csv(&self, delimiter: char) -> String {
        match self {
            Field::Int(v) => v.to_string(),
            Field::Seed(v) => v.to_string(),
            Field::Real(v) => format_real(*v),
            Field::Text(s) => quote(s, delimiter),
            Field::Bool(b) => b.to_string(),
            Field::Missing => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Field::Int(v) => Value::from(*v),
            Field::Seed(v) => Value::from(*v),
            Field::Real(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Field::Text(s) => Value::from(s.as_str()),
            Field::Bool(b) => Value::from(*b),
            Field::Missing => Value::Null,
        }
    }
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Real(v)
    }
}

impl From<usize> for Field {
    fn from(v: usize) -> Self {
        Field::Int(v as i64)
    }
}

impl From<&str> for Field {
    fn from(v: &str) -> Self {
        Field::Text(v.to_owned())
    }
}

impl From<String> for Field {
    fn from(v: String) -> Self {
        Field::Text(v)
    }
}

impl From<bool> for Field {
    fn from(v: bool) -> Self {
        Field::Bool(v)
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn quote(s: &str, delimiter: char) -> String {
    if s.contains([delimiter, '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Field>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_owned(),
            columns: columns.iter().map(|c| (*c).to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Field>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch in table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn get(&self, row: usize, column: &str) -> Option<&Field> {
        self.rows.get(row)?.get(self.column(column)?)
    }

    pub fn real(&self, row: usize, column: &str) -> Option<f64> {
        self.get(row, column)?.as_real()
    }

    pub fn to_csv(&self) -> String {
        self.to_delimited(',')
    }

    pub fn to_delimited(&self, delimiter: char) -> String {
        let sep = delimiter.to_string();
        let mut out = self.columns.iter().map(|c| quote(c, delimiter)).collect::<Vec<_>>().join(&sep);
        out.push('\n');
        for row in &self.rows {
            let line = row.iter().map(|f| f.csv(delimiter)).collect::<Vec<_>>().join(&sep);
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let obj: Map<String, Value> = self
                .columns
                .iter()
                .cloned()
                .zip(row.iter().map(Field::json))
                .collect();
            let _ = writeln!(out, "{}", Value::Object(obj));
        }
        out
    }
}

/// Reproducibility record written next to every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub experiment: String,
    pub version: String,
    pub generator: String,
    pub seed: u64,
    pub replications: usize,
    pub config: Value,
}

impl RunMetadata {
    pub fn new(experiment: &str, seed: u64, replications: usize, config: Value) -> Self {
        Self {
            experiment: experiment.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            generator: super::GENERATOR.to_owned(),
            seed,
            replications,
            config,
        }
    }
}

/// Tables produced by one experiment. Wall time is kept out of the files so
/// that reruns are byte-identical.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub metadata: RunMetadata,
    pub tables: Vec<Table>,
    pub wall_time: Duration,
}

impl ExperimentReport {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn metadata_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.metadata).expect("metadata serializes");
        s.push('\n');
        s
    }
}
