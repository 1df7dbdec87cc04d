use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Cell, DataError, Dataset, Result};
use crate::bn::Variable;

/// Empty cells and `NA` are always read as missing.
pub const DEFAULT_MISSING_TOKEN: &str = "";

fn is_missing(cell: &str, token: &str) -> bool {
    cell == token || cell.is_empty() || cell == "NA"
}

fn io_err(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads a comma-separated table with a header row. Columns are matched to
/// `schema` by name; the returned dataset follows the schema's order.
pub fn read_table(path: &Path, schema: &[Variable], missing_token: &str) -> Result<Dataset> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| io_err(path, e))?;
    read_table_str(&text, schema, missing_token)
}

pub fn read_table_str(text: &str, schema: &[Variable], missing_token: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.len() != schema.len() {
        return Err(DataError::HeaderMismatch(format!(
            "file has {} columns, schema has {} variables",
            header.len(),
            schema.len()
        )));
    }
    // column position in the file for each schema variable
    let mut source_col = Vec::with_capacity(schema.len());
    for v in schema {
        let pos = header
            .iter()
            .position(|h| h == v.name())
            .ok_or_else(|| DataError::HeaderMismatch(format!("no column named `{}`", v.name())))?;
        source_col.push(pos);
    }
    let mut records = Vec::new();
    for (r, row) in reader.records().enumerate() {
        let row = row?;
        if row.len() != header.len() {
            return Err(DataError::Ragged {
                row: r + 1,
                found: row.len(),
                expected: header.len(),
            });
        }
        let mut rec: Vec<Cell> = Vec::with_capacity(schema.len());
        for (v, &c) in schema.iter().zip(&source_col) {
            let raw = row[c].trim();
            if is_missing(raw, missing_token) {
                rec.push(None);
            } else {
                let s = v.state_index(raw).ok_or_else(|| DataError::UnknownLabel {
                    row: r + 1,
                    column: v.name().to_string(),
                    label: raw.to_string(),
                })?;
                rec.push(Some(s));
            }
        }
        records.push(rec);
    }
    Dataset::new(schema.to_vec(), records)
}

/// Variables inferred from a table: one per column, states sorted.
pub fn infer_variables(text: &str, missing_token: &str) -> Result<Vec<Variable>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut states: Vec<BTreeSet<String>> = vec![BTreeSet::new(); header.len()];
    for row in reader.records() {
        let row = row?;
        for (set, raw) in states.iter_mut().zip(row.iter()) {
            let raw = raw.trim();
            if !is_missing(raw, missing_token) {
                set.insert(raw.to_string());
            }
        }
    }
    header
        .into_iter()
        .zip(states)
        .map(|(name, s)| Variable::new(name, s.into_iter().collect()).map_err(DataError::from))
        .collect()
}

/// Writes labels quoted; missing cells become empty fields.
pub fn write_table_string(data: &Dataset) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Always)
        .from_writer(Vec::new());
    w.write_record(data.variables().iter().map(Variable::name))?;
    for rec in data.records() {
        w.write_record(
            rec.iter()
                .zip(data.variables())
                .map(|(c, v)| c.map(|s| v.states()[s].as_str()).unwrap_or(DEFAULT_MISSING_TOKEN)),
        )?;
    }
    let bytes = w.into_inner().map_err(|e| DataError::Precondition(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("labels are utf-8"))
}

pub fn write_table(path: &Path, data: &Dataset) -> Result<()> {
    let text = write_table_string(data)?;
    File::create(path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(|e| io_err(path, e))
}
