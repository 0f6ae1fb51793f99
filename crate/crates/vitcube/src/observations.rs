//! The observation CSV shared by every subcommand.
//!
//! Columns: `id, r, d_i, d_m, w, macs, top1, top5` with a header row. `top5`
//! may be left empty. Lines starting with `#` are comments. Accuracies are
//! either all fractions in `(0, 1)` or all percentages in `(0, 100]`; a file
//! is read as percentages as soon as one accuracy exceeds 1.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;
use vitcube_core::cost_model::ArchFactors;
use vitcube_core::pareto::ModelRecord;

use crate::error::CliError;

pub const COLUMNS: [&str; 8] = ["id", "r", "d_i", "d_m", "w", "macs", "top1", "top5"];

#[derive(Debug, Deserialize)]
struct Row {
    id: String,
    r: f64,
    d_i: f64,
    d_m: f64,
    w: f64,
    macs: f64,
    top1: f64,
    #[serde(default)]
    top5: Option<f64>,
}

/// Unit the accuracy columns were written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccuracyUnit {
    Fraction,
    Percent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub records: Vec<ModelRecord>,
    /// Unit found in the file; `Fraction` for a file without rows.
    pub unit: AccuracyUnit,
}

fn line_error(line: u64, message: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("line {line}: {message}"))
}

pub fn parse_observations(path: &Path) -> Result<Observations, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::file(path, e))?;
    read_observations(file).map_err(|e| match e {
        CliError::Data(m) => CliError::file(path, m),
        other => other,
    })
}

/// The reader counts neither comment nor blank lines and places a record
/// at the end of the previous one, so its position is walked forward past
/// skipped lines and converted to a 1-based line number.
fn physical_line(text: &[u8], mut at: usize) -> u64 {
    while at < text.len() {
        let end = text[at..].iter().position(|&b| b == b'\n').map_or(text.len(), |i| at + i + 1);
        let line = text[at..end].trim_ascii();
        if !(line.is_empty() || line.starts_with(b"#")) {
            break;
        }
        at = end;
    }
    1 + text[..at].iter().filter(|&&b| b == b'\n').count() as u64
}

pub fn read_observations(mut reader: impl Read) -> Result<Observations, CliError> {
    let mut text = Vec::new();
    reader.read_to_end(&mut text).map_err(|e| CliError::Data(format!("cannot read: {e}")))?;
    let line_of = |pos: Option<&csv::Position>| pos.map(|p| physical_line(&text, p.byte() as usize)).unwrap_or(0);
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(&text[..]);
    let headers = rdr.headers().map_err(|e| CliError::Data(format!("cannot read header: {e}")))?.clone();
    for required in &COLUMNS[..7] {
        if !headers.iter().any(|h| h == *required) {
            return Err(CliError::Data(format!("missing column {required:?} (expected {})", COLUMNS.join(","))));
        }
    }

    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for result in rdr.records() {
        let record = result.map_err(|e| {
            let line = line_of(e.position());
            line_error(line, e)
        })?;
        let line = line_of(record.position());
        let row: Row = record.deserialize(Some(&headers)).map_err(|e| {
            let msg = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                _ => e.to_string(),
            };
            line_error(line, msg)
        })?;
        rows.push(row);
        lines.push(line);
    }

    let percent = rows.iter().any(|r| r.top1 > 1.0 || r.top5.is_some_and(|t| t > 1.0));
    let unit = if percent { AccuracyUnit::Percent } else { AccuracyUnit::Fraction };
    let normalize = |v: f64| if percent { v / 100.0 } else { v };

    let mut seen: HashMap<String, u64> = HashMap::new();
    let mut records = Vec::with_capacity(rows.len());
    for (row, line) in rows.into_iter().zip(lines) {
        if percent {
            for (name, v) in [("top1", Some(row.top1)), ("top5", row.top5)] {
                if let Some(v) = v {
                    if v > 0.0 && v <= 1.0 {
                        return Err(line_error(
                            line,
                            format!("{name} = {v} looks like a fraction in a file of percentages (mixed units)"),
                        ));
                    }
                }
            }
        }
        if row.id.is_empty() {
            return Err(line_error(line, "empty id"));
        }
        if let Some(first) = seen.insert(row.id.clone(), line) {
            return Err(line_error(line, format!("duplicate id {:?} (first seen on line {first})", row.id)));
        }
        let record = ModelRecord {
            id: row.id,
            factors: ArchFactors { r: row.r, d_i: row.d_i, d_m: row.d_m, w: row.w },
            macs: row.macs,
            accuracy: normalize(row.top1),
            top5: row.top5.map(normalize),
        };
        record.validate().map_err(|e| line_error(line, e))?;
        records.push(record);
    }
    Ok(Observations { records, unit })
}

/// Writes records as fractions in the column order of [`COLUMNS`].
pub fn write_observations(records: &[ModelRecord], writer: impl Write) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| CliError::Data(format!("writing observations: {e}"));
    w.write_record(COLUMNS).map_err(io)?;
    for r in records {
        let f = r.factors;
        w.write_record([
            r.id.clone(),
            f.r.to_string(),
            f.d_i.to_string(),
            f.d_m.to_string(),
            f.w.to_string(),
            r.macs.to_string(),
            r.accuracy.to_string(),
            r.top5.map(|t| t.to_string()).unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Data(format!("writing observations: {e}")))?;
    Ok(())
}
