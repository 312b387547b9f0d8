//! CSV persistence for series, datasets and predictions.

use std::path::Path;

use crate::error::{Error, Result};
use crate::series::{EmbeddedDataset, TimeSeries};

/// Writes `t,value` rows.
pub fn write_series(series: &TimeSeries, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "value"])?;
    for (i, v) in series.values.iter().enumerate() {
        w.write_record([series.time_at(i).to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn parse_field(text: &str, row: usize, col: usize) -> Result<f64> {
    text.trim()
        .parse()
        .map_err(|_| Error::arg(format!("row {row}, column {col}: `{text}` is not a number")))
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row: Result<Vec<f64>> = rec.iter().enumerate().map(|(c, f)| parse_field(f, i + 1, c)).collect();
        rows.push(row?);
    }
    Ok((header, rows))
}

/// Reads a `t,value` series. The sampling step comes from the first two time stamps.
pub fn read_series(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let path = path.as_ref();
    let (header, rows) = read_table(path)?;
    if header != ["t", "value"] {
        return Err(Error::arg(format!("{}: expected header `t,value`", path.display())));
    }
    let origin = rows.first().map_or(0.0, |r| r[0]);
    let dt = match rows.get(1) {
        Some(r) => r[0] - origin,
        None => 1.0,
    };
    TimeSeries::new(rows.into_iter().map(|r| r[1]).collect(), dt, origin)
}

/// Writes `x0..x{R-1},target` rows.
pub fn write_dataset(ds: &EmbeddedDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..ds.dim).map(|i| format!("x{i}")).collect();
    header.push("target".into());
    w.write_record(&header)?;
    for (input, target) in ds.inputs.iter().zip(&ds.targets) {
        let row = input.iter().chain(std::iter::once(target)).map(f64::to_string);
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Input rows, plus the targets when the file has a trailing `target` column.
#[derive(Debug, Clone, PartialEq)]
pub struct InputTable {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Option<Vec<f64>>,
}

pub fn read_inputs(path: impl AsRef<Path>) -> Result<InputTable> {
    let path = path.as_ref();
    let (header, rows) = read_table(path)?;
    let has_target = header.last().is_some_and(|h| h == "target");
    let dim = header.len() - usize::from(has_target);
    if dim == 0 {
        return Err(Error::arg(format!("{}: no input columns", path.display())));
    }
    let mut inputs = Vec::with_capacity(rows.len());
    let mut targets = Vec::with_capacity(rows.len());
    for (i, mut row) in rows.into_iter().enumerate() {
        if row.len() != header.len() {
            return Err(Error::arg(format!("{}: row {} has {} fields", path.display(), i + 1, row.len())));
        }
        if has_target {
            targets.push(row.pop().unwrap_or_default());
        }
        inputs.push(row);
    }
    Ok(InputTable { inputs, targets: has_target.then_some(targets) })
}

/// Reads a dataset written by [`write_dataset`]; lag and horizon are not stored and default to 1.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<EmbeddedDataset> {
    let path = path.as_ref();
    let table = read_inputs(path)?;
    let targets = table
        .targets
        .ok_or_else(|| Error::arg(format!("{}: dataset needs a `target` column", path.display())))?;
    let dim = table.inputs.first().map_or(0, Vec::len);
    EmbeddedDataset::new(table.inputs, targets, dim.max(1), 1, 1)
}

pub fn write_predictions(predictions: &[f64], targets: Option<&[f64]>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    match targets {
        Some(t) => {
            w.write_record(["prediction", "target"])?;
            for (p, y) in predictions.iter().zip(t) {
                w.write_record([p.to_string(), y.to_string()])?;
            }
        }
        None => {
            w.write_record(["prediction"])?;
            for p in predictions {
                w.write_record([p.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads one column by name, falling back to the first (`last == false`) or last column.
pub fn read_column(path: impl AsRef<Path>, name: &str, last: bool) -> Result<Vec<f64>> {
    let (header, rows) = read_table(path.as_ref())?;
    let col = header
        .iter()
        .position(|h| h == name)
        .unwrap_or(if last { header.len().saturating_sub(1) } else { 0 });
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            r.get(col)
                .copied()
                .ok_or_else(|| Error::arg(format!("row {} has no column {col}", i + 1)))
        })
        .collect()
}
