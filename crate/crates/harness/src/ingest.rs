//! CSV datasets.
//!
//! `coefficients`: rows `(index, value)` with strictly increasing integer
//! indices. Indices `<= 0` are kernel coordinates (`0` is the first, `-1`
//! the second, ...), indices `1..=N` are span coordinates. Both blocks must
//! be contiguous.
//!
//! `grid`: rows `(s, value)` with strictly increasing `s` in `[0, pi]`,
//! projected onto the sine basis by trapezoidal quadrature.
//!
//! An optional header row is detected when its first field is not numeric.
//! Row numbers in errors count data rows from 1.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use fhp_core::heat::analyze_samples;
use fhp_core::spectral::HilbertElement;

use crate::config::InputFormat;
use crate::error::{HarnessError, Result};

fn row_error(path: &Path, row: usize, message: impl Into<String>) -> HarnessError {
    HarnessError::Dataset {
        path: PathBuf::from(path),
        row,
        message: message.into(),
    }
}

/// Reads two-column numeric rows, returning `(row number, a, b)`.
fn read_pairs(path: &Path) -> Result<Vec<(usize, String, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| HarnessError::io(format!("opening {}", path.display()), into_io(e)))?;
    let mut out = Vec::new();
    let mut row = 0;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| row_error(path, row + 1, format!("malformed CSV: {e}")))?;
        if i == 0 && rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        row += 1;
        if rec.len() != 2 {
            return Err(row_error(path, row, format!("expected 2 columns, found {}", rec.len())));
        }
        let value: f64 = rec[1]
            .parse()
            .map_err(|_| row_error(path, row, format!("value \"{}\" is not a number", &rec[1])))?;
        if !value.is_finite() {
            return Err(row_error(path, row, format!("value {value} is not finite")));
        }
        out.push((row, rec[0].to_string(), value));
    }
    if out.is_empty() {
        return Err(row_error(path, 0, "no data rows"));
    }
    Ok(out)
}

fn into_io(e: csv::Error) -> std::io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    }
}

fn read_coefficients(path: &Path) -> Result<HilbertElement> {
    let rows = read_pairs(path)?;
    let mut kernel_rev = Vec::new();
    let mut span = Vec::new();
    let mut prev: Option<i64> = None;
    for (row, idx, value) in rows {
        let idx: i64 = idx
            .parse()
            .map_err(|_| row_error(path, row, format!("index \"{idx}\" is not an integer")))?;
        if let Some(p) = prev {
            if idx <= p {
                return Err(row_error(
                    path,
                    row,
                    format!("index {idx} does not increase (previous {p})"),
                ));
            }
            if idx != p + 1 {
                return Err(row_error(path, row, format!("index {idx} skips after {p}")));
            }
        } else if idx > 1 {
            return Err(row_error(path, row, format!("span indices must start at 1, got {idx}")));
        }
        prev = Some(idx);
        if idx <= 0 {
            kernel_rev.push(value);
        } else {
            span.push(value);
        }
    }
    if prev.is_some_and(|p| p < 0) {
        return Err(row_error(path, 0, "kernel indices must end at 0"));
    }
    kernel_rev.reverse();
    Ok(HilbertElement::h1(kernel_rev, span))
}

fn read_grid(path: &Path, modes: usize) -> Result<HilbertElement> {
    let rows = read_pairs(path)?;
    let mut s = Vec::with_capacity(rows.len());
    let mut f = Vec::with_capacity(rows.len());
    for (row, abscissa, value) in rows {
        let x: f64 = abscissa
            .parse()
            .map_err(|_| row_error(path, row, format!("abscissa \"{abscissa}\" is not a number")))?;
        if !x.is_finite() {
            return Err(row_error(path, row, format!("abscissa {x} is not finite")));
        }
        if !(0.0..=PI).contains(&x) {
            return Err(row_error(path, row, format!("abscissa {x} outside [0, pi]")));
        }
        if s.last().is_some_and(|p| x <= *p) {
            return Err(row_error(path, row, format!("abscissa {x} does not increase")));
        }
        s.push(x);
        f.push(value);
    }
    if s.len() < 2 {
        return Err(row_error(path, 1, "grid needs at least 2 rows"));
    }
    Ok(analyze_samples(&s, &f, modes)?)
}

/// Loads a dataset. `modes` is the number of sine coefficients extracted
/// from grid data and is ignored for coefficient files.
pub fn ingest_dataset(path: &Path, format: InputFormat, modes: usize) -> Result<HilbertElement> {
    match format {
        InputFormat::Coefficients => read_coefficients(path),
        InputFormat::Grid => read_grid(path, modes),
    }
}
