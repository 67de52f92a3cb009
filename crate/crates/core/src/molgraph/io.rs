//! Library and dataset files.
//!
//! A library file holds one SMILES per line. A dataset file is CSV with the
//! header `smiles,dock_score`; scores may be the literal `NaN`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Reads a library file, skipping blank lines.
pub fn read_library(path: &Path) -> Result<Vec<String>, DataError> {
    Ok(read_library_lines(path)?.into_iter().map(|(_, s)| s).collect())
}

/// Like [`read_library`], paired with 1-based line numbers.
pub fn read_library_lines(path: &Path) -> Result<Vec<(usize, String)>, DataError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let s = line.trim();
        if !s.is_empty() {
            out.push((i + 1, s.to_string()));
        }
    }
    Ok(out)
}

pub fn write_library(path: &Path, smiles: &[String]) -> Result<(), DataError> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in smiles {
        writeln!(w, "{s}")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `smiles,dock_score` rows. Infinite scores are rejected; `NaN`
/// marks a failed docking run.
pub fn read_dataset(path: &Path) -> Result<Vec<(String, f64)>, DataError> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "smiles" || &headers[1] != "dock_score" {
        return Err(DataError::Format {
            line: 1,
            message: "expected header `smiles,dock_score`".into(),
        });
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let score: f64 = record[1].trim().parse().map_err(|_| DataError::Format {
            line,
            message: format!("bad dock_score `{}`", &record[1]),
        })?;
        if score.is_infinite() {
            return Err(DataError::Format {
                line,
                message: "dock_score is infinite".into(),
            });
        }
        out.push((record[0].trim().to_string(), score));
    }
    Ok(out)
}

pub fn write_dataset(path: &Path, rows: &[(String, f64)]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["smiles", "dock_score"])?;
    for (s, y) in rows {
        w.write_record([s.as_str(), &format_score(*y)])?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest decimal that parses back to the same value; `NaN` for NaN.
pub fn format_score(y: f64) -> String {
    if y.is_nan() {
        "NaN".to_string()
    } else {
        format!("{y}")
    }
}
