//! Float formatting and tiny CSV helpers shared by artifact writers.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Format a float with 17 significant digits so that parsing the text
/// recovers the exact bit pattern (f64 round-trips at 17 digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Parse a float previously written by [`fmt_f64`] (or any `f64` literal).
pub fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("bad float: {s:?}")))
}

pub fn parse_usize(s: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| Error::Parse(format!("bad integer: {s:?}")))
}

/// Join header and rows into CSV text (caller supplies pre-joined rows).
pub fn csv_text(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{row}");
    }
    out
}

/// Split CSV text into (header, data rows), rejecting a mismatched header.
pub fn csv_rows<'a>(text: &'a str, expect_header: &str) -> Result<Vec<Vec<&'a str>>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty csv".into()))?;
    if header.trim() != expect_header {
        return Err(Error::Parse(format!(
            "expected header {expect_header:?}, found {header:?}"
        )));
    }
    Ok(lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').collect())
        .collect())
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}
