//! Tabular output as CSV or a single JSON object.

use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Numbers as JSON numbers when finite, otherwise `"inf"`, `"-inf"` or `"nan"`.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

pub fn opt_num(v: Option<f64>) -> Value {
    v.map(num).unwrap_or(Value::Null)
}

/// One command's result: a table plus free-form config and summary.
#[derive(Debug, Clone)]
pub struct Report {
    pub config: Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub summary: Value,
    /// First violated assertion, if any.
    pub violation: Option<String>,
}

impl Report {
    pub fn new(config: Value, columns: &[&str]) -> Self {
        Self {
            config,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            summary: json!({}),
            violation: None,
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Records `what` as the violation unless an earlier one is already recorded.
    pub fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok && self.violation.is_none() {
            self.violation = Some(what.into());
        }
    }

    fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let m: Map<String, Value> = self
                    .columns
                    .iter()
                    .cloned()
                    .zip(r.iter().cloned())
                    .collect();
                Value::Object(m)
            })
            .collect();
        json!({"config": self.config, "rows": rows, "summary": self.summary})
    }

    pub fn render(&self, format: Format) -> std::io::Result<Vec<u8>> {
        match format {
            Format::Json => {
                let mut out = serde_json::to_vec_pretty(&self.to_json())?;
                out.push(b'\n');
                Ok(out)
            }
            Format::Csv => {
                let mut w = csv::WriterBuilder::new()
                    .terminator(csv::Terminator::Any(b'\n'))
                    .from_writer(Vec::new());
                w.write_record(&self.columns)?;
                for r in &self.rows {
                    w.write_record(r.iter().map(cell))?;
                }
                w.into_inner().map_err(|e| e.into_error())
            }
        }
    }

    pub fn emit(&self, format: Format, path: Option<&Path>) -> std::io::Result<()> {
        let bytes = self.render(format)?;
        match path {
            Some(p) => std::fs::write(p, bytes)?,
            None => std::io::stdout().write_all(&bytes)?,
        }
        if format == Format::Csv {
            // CSV carries rows only; the summary goes to stderr
            eprintln!("summary: {}", self.summary);
        }
        Ok(())
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
