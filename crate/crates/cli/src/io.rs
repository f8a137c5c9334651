use std::fs;
use std::path::Path;

use evospec::{Error, TimeSeries, MIN_SAMPLE_LEN};

use crate::{io_err, Result};

/// Parses a single numeric column. An optional non-numeric first line is
/// taken as a header. Errors cite 1-based line numbers of the file.
pub fn parse_series(text: &str) -> Result<TimeSeries> {
    let lines: Vec<&str> = text.trim_end().lines().collect();
    let mut values = Vec::with_capacity(lines.len());
    for (idx, raw) in lines.iter().enumerate() {
        let line_no = idx + 1;
        let cell = raw.trim().trim_start_matches('\u{feff}');
        if cell.contains(',') || cell.contains(';') || cell.contains('\t') {
            return Err(Error::Parse {
                line: line_no,
                message: "expected a single column".into(),
            }
            .into());
        }
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ if idx == 0 && !cell.is_empty() => {}
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("'{cell}' is not a finite number"),
                }
                .into())
            }
        }
    }
    if values.is_empty() {
        return Err(Error::Parse {
            line: lines.len().max(1),
            message: "no data rows".into(),
        }
        .into());
    }
    if values.len() < MIN_SAMPLE_LEN {
        return Err(Error::Size(format!(
            "{} rows, at least {MIN_SAMPLE_LEN} required",
            values.len()
        ))
        .into());
    }
    Ok(TimeSeries::new(values)?)
}

pub fn read_series(path: &Path) -> Result<TimeSeries> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_series(&text)
}

/// CSV with header `x`.
pub fn series_csv(x: &TimeSeries) -> String {
    let mut out = String::with_capacity(x.len() * 20 + 2);
    out.push_str("x\n");
    for v in x.values() {
        out.push_str(&format!("{v}\n"));
    }
    out
}

pub fn write_series(path: &Path, x: &TimeSeries) -> Result<()> {
    fs::write(path, series_csv(x)).map_err(io_err(path))
}
