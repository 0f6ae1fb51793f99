//! CSV helpers for plot-ready output.

use crate::error::CliError;

/// Shortest decimal form that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    v.to_string()
}

pub fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Data(format!("writing csv: {e}"));
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Data(format!("writing csv: {e}")))
}

/// Matrix layout: the header holds the `x` values, each row starts with its
/// `y` value. `value(i, j)` is the entry at `x[i]`, `y[j]`.
pub fn matrix_csv(x: &[f64], y: &[f64], value: impl Fn(usize, usize) -> f64) -> Result<Vec<u8>, CliError> {
    let mut header = vec!["y\\x".to_string()];
    header.extend(x.iter().map(|v| fmt_f64(*v)));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = y.iter().enumerate().map(|(j, yv)| {
        let mut row = Vec::with_capacity(x.len() + 1);
        row.push(fmt_f64(*yv));
        row.extend((0..x.len()).map(|i| fmt_f64(value(i, j))));
        row
    });
    csv_bytes(&header, rows.collect())
}
