//! CSV tables and output sinks.

use crate::{Failure, Outcome};
use std::io::Write;
use std::path::Path;

/// Shortest decimal that parses back to the same `f64`.
pub fn real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Outcome<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Failure::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Failure::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("cells are UTF-8"))
    }
}

pub fn write(path: Option<&Path>, text: &str) -> Outcome<()> {
    let io = |e: std::io::Error| Failure::Io(e.to_string());
    match path {
        Some(path) => std::fs::write(path, text).map_err(io),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(io)?;
            stdout.flush().map_err(io)
        }
    }
}
