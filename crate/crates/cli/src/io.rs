//! CSV ingestion and atomic output.

use std::fs;
use std::io::Write;
use std::path::Path;

use hyperclust::missing::MaskedDataset;
use nalgebra::DMatrix;

use crate::error::{CliError, CliResult};

/// Reads a headed numeric table; cells equal to one of `na` (after
/// trimming) are missing.
pub fn load_csv(path: &Path, na: &[String]) -> CliResult<MaskedDataset> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let p = names.len();
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let line = r + 2;
        if rec.len() != p {
            return Err(CliError::Data(format!("{}: line {line} has {} fields, header has {p}", path.display(), rec.len())));
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                if na.iter().any(|t| t == cell) {
                    return Ok(None);
                }
                cell.parse::<f64>().ok().filter(|v| v.is_finite()).map(Some).ok_or_else(|| {
                    CliError::Data(format!("{}: line {line}, column '{}': '{cell}' is not a number", path.display(), names[j]))
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    Ok(MaskedDataset::from_rows(&rows)?.with_column_names(names)?)
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io)?;
    let name = path.file_name().ok_or_else(|| CliError::Usage(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

fn csv_bytes<F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>>(fill: F) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    fill(&mut w).map_err(|e| CliError::Io(e.to_string()))?;
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

/// Matrix with a header; NaN cells are written as `NA`.
pub fn write_matrix(path: &Path, names: &[String], x: &DMatrix<f64>) -> CliResult<()> {
    let bytes = csv_bytes(|w| {
        w.write_record(names)?;
        for i in 0..x.nrows() {
            w.write_record((0..x.ncols()).map(|j| if x[(i, j)].is_nan() { "NA".to_string() } else { x[(i, j)].to_string() }))?;
        }
        Ok(())
    })?;
    write_atomic(path, &bytes)
}

/// Zero-based labels written one-based under a `label` header.
pub fn write_labels(path: &Path, labels: &[usize]) -> CliResult<()> {
    let bytes = csv_bytes(|w| {
        w.write_record(["label"])?;
        for l in labels {
            w.write_record([(l + 1).to_string()])?;
        }
        Ok(())
    })?;
    write_atomic(path, &bytes)
}

/// Arbitrary table of strings.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let bytes = csv_bytes(|w| {
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        Ok(())
    })?;
    write_atomic(path, &bytes)
}

/// First column of a headed CSV as integer labels; the values are only
/// compared, so any integer coding works.
pub fn read_labels(path: &Path) -> CliResult<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).flexible(true).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let cell = rec.get(0).unwrap_or("");
        let v = cell
            .parse::<usize>()
            .map_err(|_| CliError::Data(format!("{}: line {}: '{cell}' is not a label", path.display(), r + 2)))?;
        out.push(v);
    }
    Ok(out)
}
