//! Two-column table files shared by rate tables and schedules.
//!
//! CSV files carry a header row and one `(alpha, value)` pair per line; JSON
//! files hold `{"alphas": [...], "values": [...]}`. Floats are written in
//! Rust's shortest round-trip form, so reading a file back is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoColumn {
    pub alphas: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn to_csv_string(header: (&str, &str), data: &TwoColumn) -> String {
    let mut out = String::with_capacity(32 * data.alphas.len() + 16);
    out.push_str(header.0);
    out.push(',');
    out.push_str(header.1);
    out.push('\n');
    for (a, v) in data.alphas.iter().zip(&data.values) {
        out.push_str(&format!("{a:?},{v:?}\n"));
    }
    out
}

pub fn from_csv_str(text: &str) -> Result<TwoColumn> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut alphas = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != 2 {
            return Err(Error::InvalidArgument(format!(
                "expected 2 columns, found {}",
                record.len()
            )));
        }
        alphas.push(parse_f64(&record[0])?);
        values.push(parse_f64(&record[1])?);
    }
    Ok(TwoColumn { alphas, values })
}

pub(crate) fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidArgument(format!("not a number: `{s}`")))
}

pub fn to_json_string(data: &TwoColumn) -> Result<String> {
    Ok(serde_json::to_string_pretty(data)?)
}

pub fn from_json_str(text: &str) -> Result<TwoColumn> {
    Ok(serde_json::from_str(text)?)
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_string(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Reads a two-column file, choosing JSON for `.json` and CSV otherwise.
pub fn read_two_column(path: &Path) -> Result<TwoColumn> {
    let text = read_to_string(path)?;
    if is_json(path) {
        from_json_str(&text)
    } else {
        from_csv_str(&text)
    }
}

pub fn write_two_column(path: &Path, header: (&str, &str), data: &TwoColumn) -> Result<()> {
    let text = if is_json(path) {
        to_json_string(data)?
    } else {
        to_csv_string(header, data)
    };
    write_string(path, &text)
}

fn is_json(path: &Path) -> bool {
    path.extension()
        .map(|e| e.eq_ignore_ascii_case("json"))
        .unwrap_or(false)
}
