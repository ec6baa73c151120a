//! CSV tables, JSON documents and matrix input.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use ldplab_core::DenseMatrix;
use serde::Serialize;

use crate::UsageError;

pub const BUILD_ID: &str = env!("LDPLAB_BUILD_ID");

/// One CSV line. `f64` display is the shortest string that parses back to
/// the same value.
pub fn csv_row(values: &[f64]) -> String {
    let mut line = values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",");
    line.push('\n');
    line
}

pub fn parse_csv_row(line: &str) -> anyhow::Result<Vec<f64>> {
    line.trim()
        .split(',')
        .map(|field| {
            field
                .trim()
                .parse::<f64>()
                .map_err(|_| UsageError(format!("bad number {field:?}")).into())
        })
        .collect()
}

/// Writes to `path`, or to stdout when there is none.
pub fn emit(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

/// `samples.csv` → `samples.csv.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

#[derive(Serialize)]
pub struct Sidecar<'a, T: Serialize> {
    pub command: &'a str,
    pub build: &'a str,
    pub version: &'a str,
    pub config: &'a T,
}

pub fn sidecar<'a, T: Serialize>(command: &'a str, config: &'a T) -> Sidecar<'a, T> {
    Sidecar {
        command,
        build: BUILD_ID,
        version: env!("CARGO_PKG_VERSION"),
        config,
    }
}

/// A matrix given inline as JSON rows.
pub fn parse_matrix_json(text: &str) -> anyhow::Result<DenseMatrix> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(text)
        .map_err(|e| UsageError(format!("matrix must be a JSON list of rows: {e}")))?;
    DenseMatrix::from_rows(&rows).map_err(|e| UsageError(format!("malformed matrix: {e}")).into())
}

/// Line `line` of a CSV file of flattened row-major draws, reshaped to
/// `rows` rows.
pub fn read_matrix_csv(path: &Path, line: usize, rows: usize) -> anyhow::Result<DenseMatrix> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let record = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .nth(line)
        .ok_or_else(|| UsageError(format!("{} has no line {line}", path.display())))?;
    let values = parse_csv_row(record)?;
    if rows == 0 || values.is_empty() || values.len() % rows != 0 {
        return Err(UsageError(format!("{} values do not fill {rows} rows", values.len())).into());
    }
    let cols = values.len() / rows;
    Ok(DenseMatrix::new(rows, cols, values)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let values = [0.1 + 0.2, -1.0 / 3.0, 1e-300, 6.02214076e23, -0.0];
        let back = parse_csv_row(&csv_row(&values)).unwrap();
        for (a, b) in values.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn malformed_matrices_are_usage_errors() {
        for bad in ["[[1, 2], [3]]", "{}", "[[1, \"x\"]]"] {
            let err = parse_matrix_json(bad).unwrap_err();
            assert!(err.downcast_ref::<UsageError>().is_some(), "{bad}");
        }
        assert_eq!(parse_matrix_json("[[0.5, 0.1]]").unwrap().cols(), 2);
    }

    #[test]
    fn sidecar_sits_next_to_the_table() {
        assert_eq!(
            sidecar_path(Path::new("out/x.csv")),
            PathBuf::from("out/x.csv.json")
        );
    }
}
