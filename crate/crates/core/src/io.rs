//! File formats: headerless sample-major CSV views, `id,label` CSVs and JSON
//! reports.
//!
//! CSV rows are samples and columns are features; views are transposed on load
//! to the `D_m x N` layout used everywhere else.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::data::MultiviewDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

fn parse_error(path: &Path, row: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        row,
        col,
        msg: msg.into(),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let row = e.position().map(|p| p.record() as usize + 1).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => parse_error(path, row, 0, format!("{other:?}")),
    }
}

/// Read one headerless CSV as a `D x N` matrix (file rows become columns).
/// Row and column numbers in errors are 1-based.
pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                parse_error(path, r + 1, c + 1, format!("'{cell}' is not a number"))
            })?;
            if !v.is_finite() {
                return Err(parse_error(
                    path,
                    r + 1,
                    c + 1,
                    format!("'{cell}' is not finite"),
                ));
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_error(
                    path,
                    r + 1,
                    row.len().min(first.len()) + 1,
                    format!("row has {} columns, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_error(path, 0, 0, "file contains no rows"));
    }
    let (n, d) = (rows.len(), rows[0].len());
    Ok(Matrix::from_fn(d, n, |i, j| rows[j][i]))
}

/// Load one view per file; all files must have the same number of rows.
pub fn load_dataset<P: AsRef<Path>>(paths: &[P]) -> Result<MultiviewDataset> {
    if paths.is_empty() {
        return Err(Error::Input("no view files given".into()));
    }
    let mut views = Vec::with_capacity(paths.len());
    for p in paths {
        let p = p.as_ref();
        let v = read_matrix_csv(p)?;
        if let Some(first) = views.first().map(|m: &Matrix| m.ncols()) {
            if v.ncols() != first {
                return Err(Error::Dimension(format!(
                    "{} has {} samples, {} has {first}",
                    p.display(),
                    v.ncols(),
                    paths[0].as_ref().display()
                )));
            }
        }
        views.push(v);
    }
    MultiviewDataset::new(views)
}

/// Write a `D x N` matrix as a headerless CSV with one sample per row.
/// Values use the shortest representation that reads back bit-exactly.
pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(file);
    for j in 0..m.ncols() {
        let row: Vec<String> = m.column(j).iter().map(|v| format!("{v:?}")).collect();
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write every view of `data` to `<dir>/<prefix><m>.csv`, returning the paths.
pub fn save_dataset(data: &MultiviewDataset, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for (m, v) in data.views().iter().enumerate() {
        let p = dir.join(format!("{prefix}{m}.csv"));
        write_matrix_csv(&p, v)?;
        out.push(p);
    }
    Ok(out)
}

/// Read an `id,label` CSV (optional header line) into a dense label vector
/// over `0..n`. Every id must appear exactly once.
pub fn read_labels(path: &Path, n: usize) -> Result<Vec<usize>> {
    let pairs = read_id_label_pairs(path)?;
    let mut out = vec![None; n];
    for (row, id, label) in pairs {
        if id >= n {
            return Err(parse_error(
                path,
                row,
                1,
                format!("sample id {id} out of range (N = {n})"),
            ));
        }
        if out[id].replace(label).is_some() {
            return Err(parse_error(
                path,
                row,
                1,
                format!("sample id {id} listed twice"),
            ));
        }
    }
    out.iter()
        .enumerate()
        .map(|(i, l)| {
            l.ok_or_else(|| Error::Input(format!("{}: no label for sample {i}", path.display())))
        })
        .collect()
}

/// Raw `(row, id, label)` triples of an `id,label` CSV.
pub fn read_id_label_pairs(path: &Path) -> Result<Vec<(usize, usize, usize)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut out = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = r + 1;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != 2 {
            return Err(parse_error(
                path,
                row,
                1,
                format!("expected 2 columns, got {}", record.len()),
            ));
        }
        let id = record[0].parse::<usize>();
        let label = record[1].parse::<usize>();
        match (id, label) {
            (Ok(i), Ok(l)) => out.push((row, i, l)),
            // A non-numeric first line is a header.
            (Err(_), _) if r == 0 => continue,
            (Err(_), _) => {
                return Err(parse_error(
                    path,
                    row,
                    1,
                    format!("'{}' is not a sample id", &record[0]),
                ))
            }
            (_, Err(_)) => {
                return Err(parse_error(
                    path,
                    row,
                    2,
                    format!("'{}' is not a label", &record[1]),
                ))
            }
        }
    }
    Ok(out)
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut text = String::from("id,label\n");
    for (i, l) in labels.iter().enumerate() {
        text.push_str(&format!("{i},{l}\n"));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
