//! Dataset loading and saving. Everything is densified on load.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{DenseMatrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Libsvm,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: DenseMatrix,
    pub labels: Vector,
    pub source_format: DataFormat,
}

fn parse_err(line: usize, column: Option<usize>, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn parse_number(token: &str, line: usize, column: usize) -> Result<f64> {
    let v: f64 = token
        .parse()
        .map_err(|_| parse_err(line, Some(column), format!("`{token}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, Some(column), format!("`{token}` is not finite")));
    }
    Ok(v)
}

pub fn read_libsvm(path: impl AsRef<Path>, num_features: Option<usize>) -> Result<Dataset> {
    parse_libsvm(BufReader::new(File::open(path)?), num_features)
}

/// Parses `label idx:val idx:val ...` lines with 1-based indices. Text after
/// `#` is ignored. Columns in errors count whitespace-separated tokens from 1.
pub fn parse_libsvm(reader: impl BufRead, num_features: Option<usize>) -> Result<Dataset> {
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label = parse_number(tokens.next().expect("non-empty line"), lineno, 1)?;
        let mut entries = Vec::new();
        for (pos, tok) in tokens.enumerate() {
            let column = pos + 2;
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, Some(column), format!("expected idx:val, got `{tok}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(lineno, Some(column), format!("bad feature index `{idx}`")))?;
            if idx == 0 {
                return Err(parse_err(lineno, Some(column), "feature indices are 1-based"));
            }
            if let Some(limit) = num_features {
                if idx > limit {
                    return Err(parse_err(
                        lineno,
                        Some(column),
                        format!("feature index {idx} exceeds the declared {limit} features"),
                    ));
                }
            }
            max_index = max_index.max(idx);
            entries.push((idx - 1, parse_number(val, lineno, column)?));
        }
        labels.push(label);
        rows.push(entries);
    }
    if rows.is_empty() {
        return Err(parse_err(0, None, "dataset has no rows"));
    }
    let cols = num_features.unwrap_or(max_index);
    let mut dense = vec![0.0; rows.len() * cols];
    let n = rows.len();
    for (i, entries) in rows.iter().enumerate() {
        for &(j, v) in entries {
            dense[j * n + i] = v;
        }
    }
    Ok(Dataset {
        features: DenseMatrix::from_column_major(n, cols, dense)?,
        labels: Vector::from_vec(labels),
        source_format: DataFormat::Libsvm,
    })
}

/// Writes nonzero entries only. Values use the shortest round-trip form.
pub fn write_libsvm(writer: impl Write, data: &Dataset) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for i in 0..data.features.rows() {
        write!(w, "{}", data.labels[i])?;
        for (j, v) in data.features.row(i).into_iter().enumerate() {
            if v != 0.0 {
                write!(w, " {}:{}", j + 1, v)?;
            }
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>, label_column: usize) -> Result<Dataset> {
    parse_csv(File::open(path)?, label_column)
}

/// Rectangular numeric CSV. A first line with any non-numeric cell is a header.
pub fn parse_csv(reader: impl Read, label_column: usize) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut labels = Vec::new();
    let mut features: Vec<f64> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| parse_err(idx + 1, None, e.to_string()))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(idx + 1);
        if idx == 0 && record.iter().any(|cell| cell.parse::<f64>().is_err()) {
            continue;
        }
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        match width {
            None => {
                if label_column >= record.len() {
                    return Err(parse_err(
                        line,
                        Some(label_column + 1),
                        format!("label column {label_column} out of range for {} columns", record.len()),
                    ));
                }
                width = Some(record.len());
            }
            Some(w) if w != record.len() => {
                return Err(parse_err(
                    line,
                    None,
                    format!("expected {w} columns, found {}", record.len()),
                ));
            }
            _ => {}
        }
        for (col, cell) in record.iter().enumerate() {
            let v = parse_number(cell, line, col + 1)?;
            if col == label_column {
                labels.push(v);
            } else {
                features.push(v);
            }
        }
    }
    let Some(width) = width else {
        return Err(parse_err(0, None, "dataset has no rows"));
    };
    let n = labels.len();
    Ok(Dataset {
        features: DenseMatrix::from_row_major(n, width - 1, &features)?,
        labels: Vector::from_vec(labels),
        source_format: DataFormat::Csv,
    })
}

/// Label first, then features in order; no header.
pub fn write_csv(writer: impl Write, data: &Dataset) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for i in 0..data.features.rows() {
        write!(w, "{}", data.labels[i])?;
        for v in data.features.row(i) {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
