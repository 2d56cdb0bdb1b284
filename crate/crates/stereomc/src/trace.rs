//! Trace rows and the CSV formats the harness writes.
//!
//! The column set of `trace.csv` is part of the external contract:
//! `epoch,t,x1,latitude,kind,mu_norm,sigma_trace`.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// What produced a trace row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Accept,
    Reject,
    Bounce,
    Refresh,
    Skeleton,
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StepKind::Accept => "accept",
            StepKind::Reject => "reject",
            StepKind::Bounce => "bounce",
            StepKind::Refresh => "refresh",
            StepKind::Skeleton => "skeleton",
        };
        f.write_str(s)
    }
}

/// One sample or skeleton row.
#[derive(Debug, Clone, Copy)]
pub struct TraceRecord {
    pub epoch: usize,
    /// Step index (discrete samplers) or geodesic time (SBPS skeleton).
    pub t: f64,
    pub x1: f64,
    pub latitude: f64,
    pub kind: StepKind,
    /// Norm of the precondition location in force for this row.
    pub mu_norm: f64,
    /// Trace of the precondition scale in force for this row.
    pub sigma_trace: f64,
}

pub const TRACE_HEADER: &str = "epoch,t,x1,latitude,kind,mu_norm,sigma_trace";

pub fn write_trace_csv(path: &Path, rows: &[TraceRecord]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{TRACE_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.epoch, r.t, r.x1, r.latitude, r.kind, r.mu_norm, r.sigma_trace
        )?;
    }
    w.flush()
}

/// Reads one numeric column from a CSV with a header row. Returns `None`
/// when the column does not exist.
pub fn read_csv_column(path: &Path, column: &str) -> std::io::Result<Option<Vec<f64>>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => return Ok(Some(Vec::new())),
    };
    let idx = match header.split(',').position(|c| c == column) {
        Some(i) => i,
        None => return Ok(None),
    };
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let field = line.split(',').nth(idx).unwrap_or("");
        out.push(field.parse::<f64>().unwrap_or(f64::NAN));
    }
    Ok(Some(out))
}
