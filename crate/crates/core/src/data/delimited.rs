//! Comma-separated numeric tables: optional header row, UTF-8, `.` decimals.
//! Rows and columns in errors are 1-based; rows count data records only.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub fn load_delimited(path: &Path, has_header: bool, label_column: Option<&str>) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_delimited(file, has_header, label_column)
}

pub fn read_delimited<R: Read>(reader: R, has_header: bool, label_column: Option<&str>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header: Option<Vec<String>> = if has_header {
        let h = rdr.headers().map_err(|e| csv_error(e, 0))?;
        Some(h.iter().map(str::to_owned).collect())
    } else {
        None
    };
    let label_idx = match (label_column, &header) {
        (None, _) => None,
        (Some(name), Some(h)) => Some(h.iter().position(|c| c == name).ok_or_else(|| Error::Parse {
            row: 0,
            column: 0,
            message: format!("unknown label column `{name}`"),
        })?),
        (Some(name), None) => {
            return Err(Error::Parse {
                row: 0,
                column: 0,
                message: format!("label column `{name}` requires a header row"),
            })
        }
    };

    let mut width = header.as_ref().map(Vec::len);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut n_rows = 0;
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| csv_error(e, row))?;
        // a lone empty field is a blank line
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Parse {
                    row,
                    column: record.len().min(w) + 1,
                    message: format!("expected {w} fields, found {}", record.len()),
                })
            }
            _ => {}
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: j + 1,
                message: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: j + 1,
                    message: format!("`{cell}` is not finite"),
                });
            }
            if Some(j) == label_idx {
                if v != 0.0 && v != 1.0 {
                    return Err(Error::Parse {
                        row,
                        column: j + 1,
                        message: format!("label `{cell}` is not 0 or 1"),
                    });
                }
                labels.push(v as u8);
            } else {
                values.push(v);
            }
        }
        n_rows += 1;
    }

    let total = width.unwrap_or(0);
    let cols = total - usize::from(label_idx.is_some());
    let x = Matrix::new(n_rows, cols, values)?;
    let ds = Dataset::new(x, label_idx.map(|_| labels))?;
    match header {
        Some(mut h) => {
            if let Some(li) = label_idx {
                h.remove(li);
            }
            ds.with_feature_names(h)
        }
        None => Ok(ds),
    }
}

fn csv_error(e: csv::Error, row: usize) -> Error {
    Error::Parse {
        row,
        column: 0,
        message: e.to_string(),
    }
}

/// Writes a header (`feature names` or `f0..`, plus `label` when present)
/// followed by one row per instance. Floats use the shortest representation
/// that parses back to the same value.
pub fn write_delimited<W: Write>(mut out: W, data: &Dataset) -> std::io::Result<()> {
    let names: Vec<String> = match data.feature_names() {
        Some(n) => n.to_vec(),
        None => (0..data.n_cols()).map(|j| format!("f{j}")).collect(),
    };
    let mut line = names.join(",");
    if data.labels().is_some() {
        if !line.is_empty() {
            line.push(',');
        }
        line.push_str("label");
    }
    writeln!(out, "{line}")?;
    for (i, row) in data.x().iter_rows().enumerate() {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        if let Some(l) = data.labels() {
            if !row.is_empty() {
                line.push(',');
            }
            line.push_str(&l[i].to_string());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}
