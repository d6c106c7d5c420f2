//! CSV and JSON outputs.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::monte_carlo::EstimatorReport;
use crate::rate::PathMatrix;

/// Bumped whenever a CSV layout changes.
pub const FORMAT_VERSION: u32 = 1;

/// Round-trip formatting: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// A path with its space and time coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTable {
    pub centers: Vec<f64>,
    pub times: Vec<f64>,
    pub path: PathMatrix,
}

/// Header `t, x_0, ..., x_{M-1}` (cell centers), then one row per time level.
pub fn write_path_csv<W: Write>(out: W, table: &PathTable) -> Result<()> {
    let cells = table.path.cells();
    if table.centers.len() != cells || table.times.len() != table.path.levels() {
        return Err(Error::Format("path table coordinates do not match the path".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(table.centers.iter().map(|&x| fmt_f64(x)));
    w.write_record(&header).map_err(csv_err)?;
    for (n, &t) in table.times.iter().enumerate() {
        let mut row = vec![fmt_f64(t)];
        row.extend(table.path.slice(n).iter().map(|&q| fmt_f64(q)));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_field(field: &str, row: usize, col: usize) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::Format(format!("row {row}, column {col}: not a number: {field:?}")))?;
    if !v.is_finite() {
        return Err(Error::Format(format!("row {row}, column {col}: not finite")));
    }
    Ok(v)
}

/// Parses a path written by [`write_path_csv`].
pub fn read_path_csv<R: Read>(input: R) -> Result<PathTable> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut records = r.records();
    let header = records
        .next()
        .ok_or_else(|| Error::Format("empty path file".into()))?
        .map_err(csv_err)?;
    if header.get(0).map(str::trim) != Some("t") {
        return Err(Error::Format("path header must start with \"t\"".into()));
    }
    let centers = header
        .iter()
        .skip(1)
        .enumerate()
        .map(|(c, f)| parse_field(f, 0, c + 1))
        .collect::<Result<Vec<_>>>()?;
    if centers.len() < 4 {
        return Err(Error::Format(format!("need at least 4 cells, got {}", centers.len())));
    }
    let mut times = Vec::new();
    let mut data = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = i + 1;
        if rec.len() != centers.len() + 1 {
            return Err(Error::Format(format!(
                "row {row}: expected {} fields, got {}",
                centers.len() + 1,
                rec.len()
            )));
        }
        times.push(parse_field(&rec[0], row, 0)?);
        for (c, f) in rec.iter().enumerate().skip(1) {
            data.push(parse_field(f, row, c)?);
        }
    }
    if times.len() < 2 {
        return Err(Error::Format("path needs at least two time levels".into()));
    }
    let path = PathMatrix::from_flat(times.len(), centers.len(), data);
    Ok(PathTable { centers, times, path })
}

pub fn read_path_file(path: &Path) -> Result<PathTable> {
    read_path_csv(File::open(path)?)
}

pub const REPORT_HEADER: [&str; 11] = [
    "format_version",
    "eps",
    "estimator",
    "estimate",
    "std",
    "ci_low",
    "ci_high",
    "rel_error",
    "K",
    "seed",
    "saturated",
];

pub fn write_reports_csv<W: Write>(out: W, reports: &[EstimatorReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER).map_err(csv_err)?;
    for r in reports {
        w.write_record([
            FORMAT_VERSION.to_string(),
            fmt_f64(r.epsilon),
            r.estimator.clone(),
            fmt_f64(r.estimate),
            fmt_f64(r.std),
            fmt_f64(r.ci_low),
            fmt_f64(r.ci_high),
            fmt_f64(r.relative_error),
            r.samples.to_string(),
            r.seed.to_string(),
            r.flagged_saturated.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// A cell of a generic table row.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => fmt_f64(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// Table with a leading `format_version` column.
pub fn write_table_csv<W: Write>(out: W, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut h = vec!["format_version"];
    h.extend_from_slice(header);
    w.write_record(&h).map_err(csv_err)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Format(format!(
                "row has {} cells, header has {}",
                row.len(),
                header.len()
            )));
        }
        let mut rec = vec![FORMAT_VERSION.to_string()];
        rec.extend(row.iter().map(Cell::render));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Run metadata sidecar.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata<'a, C: Serialize> {
    pub version: &'a str,
    pub format_version: u32,
    pub subcommand: &'a str,
    pub seed: u64,
    pub config: &'a C,
}

pub fn write_json<W: Write, T: Serialize>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Error::Format(e.to_string()))?;
    out.write_all(b"\n")?;
    Ok(())
}
