//! Versioned on-disk artifact helpers shared by all modules.
//!
//! Every artifact is either a JSON document (metadata, summaries, configs) or
//! a CSV table of full-precision decimal floats with a one-line header.  CSV
//! bodies carry no timestamps so reruns are byte-identical; metadata carries a
//! `format_version` field checked on load.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

/// Current on-disk format version for all artifacts.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("json failure: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported format version {found}, this build reads version {supported}; regenerate the artifact with the current tool")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("corrupt table {path}: {detail}")]
    CorruptTable { path: String, detail: String },
}

/// Fail unless `found` is the supported format version.
pub fn check_version(found: u32) -> Result<(), IoError> {
    if found != FORMAT_VERSION {
        return Err(IoError::VersionMismatch {
            found,
            supported: FORMAT_VERSION,
        });
    }
    Ok(())
}

/// Write a CSV table with named columns; values use shortest round-trip
/// decimal text, so load(save(x)) == x bitwise.
pub fn write_csv(path: &Path, columns: &[&str], rows: &[Vec<f64>]) -> Result<(), IoError> {
    let mut out = String::new();
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&format_f64(*v));
        }
        out.push('\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Shortest decimal text that round-trips the exact f64 bits.
pub fn format_f64(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        // keep a decimal point so the column stays visibly floating-point
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

/// Read a CSV table written by `write_csv`; checks rectangular shape.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), IoError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| corrupt(path, "empty file"))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect::<Vec<_>>();
    let ncol = header.len();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| corrupt(path, &format!("row {}: {e}", k + 2)))?;
        if row.len() != ncol {
            return Err(corrupt(
                path,
                &format!("row {} has {} fields, expected {ncol}", k + 2, row.len()),
            ));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

fn corrupt(path: &Path, detail: &str) -> IoError {
    IoError::CorruptTable {
        path: path.display().to_string(),
        detail: detail.to_string(),
    }
}

/// Serialize a JSON document with stable formatting (pretty, trailing newline).
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Load a JSON document.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Extract the `format_version` field of a JSON metadata file and check it.
pub fn read_versioned_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path)?;
    let probe: serde_json::Value = serde_json::from_str(&text)?;
    let found = probe
        .get("format_version")
        .and_then(|v| v.as_u64())
        .unwrap_or(0) as u32;
    check_version(found)?;
    Ok(serde_json::from_str(&text)?)
}
