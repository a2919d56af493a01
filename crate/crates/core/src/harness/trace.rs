//! Per-run trace files: one CSV row per objective evaluation.
//!
//! Columns are `iteration, phase, x_0..x_{d-1}, y, incumbent_y, region_radius,
//! regret_estimate, jitter, wall_time_s`; reals are written with 17
//! significant digits so that reading a file reproduces the trace exactly.
//! Missing optional values are empty fields. The incumbent point is not stored;
//! it is rebuilt from the rows, since it is always the first observation
//! attaining the running minimum.

use std::io::{Read, Write};
use std::path::Path;

use crate::controller::{Phase, StepRecord};
use crate::error::{Error, Result};

pub fn format_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn format_optional(v: Option<f64>) -> String {
    v.map(format_real).unwrap_or_default()
}

pub fn header(dim: usize) -> Vec<String> {
    let mut h = vec!["iteration".to_string(), "phase".to_string()];
    h.extend((0..dim).map(|k| format!("x_{k}")));
    h.extend(
        [
            "y",
            "incumbent_y",
            "region_radius",
            "regret_estimate",
            "jitter",
            "wall_time_s",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    h
}

pub fn write_trace<W: Write>(writer: W, trace: &[StepRecord], dim: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header(dim))?;
    for s in trace {
        if s.x.len() != dim {
            return Err(Error::InvalidArgument(format!(
                "trace row {} has dimension {}, expected {dim}",
                s.iteration,
                s.x.len()
            )));
        }
        let mut row = vec![s.iteration.to_string(), s.phase.as_str().to_string()];
        row.extend(s.x.iter().map(|v| format_real(*v)));
        row.push(format_real(s.y));
        row.push(format_real(s.incumbent_y));
        row.push(format_optional(s.region_radius));
        row.push(format_optional(s.regret_estimate));
        row.push(format_real(s.jitter));
        row.push(format_real(s.wall_time_s));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_file(path: &Path, trace: &[StepRecord], dim: usize) -> Result<()> {
    let file =
        std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_trace(std::io::BufWriter::new(file), trace, dim)
}

fn parse_real(field: &str, column: &str, row: usize) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::Parse(format!("row {row}: invalid `{column}` value `{field}`")))
}

fn parse_optional(field: &str, column: &str, row: usize) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_real(field, column, row).map(Some)
    }
}

pub fn read_trace<R: Read>(reader: R) -> Result<Vec<StepRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    let dim = headers.iter().filter(|h| h.starts_with("x_")).count();
    if headers.iter().collect::<Vec<_>>() != header(dim) {
        return Err(Error::Parse(format!(
            "unexpected trace header: {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let mut trace = Vec::new();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (row, record) in r.records().enumerate() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let iteration = field(0)
            .parse()
            .map_err(|_| Error::Parse(format!("row {row}: invalid iteration `{}`", field(0))))?;
        let phase = Phase::parse(field(1))
            .ok_or_else(|| Error::Parse(format!("row {row}: unknown phase `{}`", field(1))))?;
        let x = (0..dim)
            .map(|k| parse_real(field(2 + k), "x", row))
            .collect::<Result<Vec<_>>>()?;
        let base = 2 + dim;
        let y = parse_real(field(base), "y", row)?;
        if y.is_finite() && best.as_ref().is_none_or(|(_, b)| y < *b) {
            best = Some((x.clone(), y));
        }
        trace.push(StepRecord {
            iteration,
            phase,
            incumbent_x: best.as_ref().map_or_else(|| x.clone(), |b| b.0.clone()),
            x,
            y,
            incumbent_y: parse_real(field(base + 1), "incumbent_y", row)?,
            region_radius: parse_optional(field(base + 2), "region_radius", row)?,
            regret_estimate: parse_optional(field(base + 3), "regret_estimate", row)?,
            jitter: parse_real(field(base + 4), "jitter", row)?,
            wall_time_s: parse_real(field(base + 5), "wall_time_s", row)?,
        });
    }
    Ok(trace)
}

pub fn read_trace_file(path: &Path) -> Result<Vec<StepRecord>> {
    let file =
        std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_trace(std::io::BufReader::new(file))
}
