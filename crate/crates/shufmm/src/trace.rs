//! Solver-independent trace rows and their CSV encoding.

use crate::solver_nc::EpochRecordNC;
use crate::solver_nl::EpochRecordNL;
use std::fmt::Write as _;
use std::io::{self, Write};

pub const TRACE_HEADER: &str =
    "epoch,seed,algorithm,objective,grad_map_norm,gamma,f_evals,jac_evals,gradw_evals,gradu_evals,wall_ms";

/// One CSV row; `None` and NaN encode as empty cells.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub epoch: usize,
    pub seed: u64,
    pub algorithm: String,
    pub objective: Option<f64>,
    pub grad_map_norm: Option<f64>,
    pub gamma: Option<f64>,
    pub f_evals: Option<u64>,
    pub jac_evals: Option<u64>,
    pub gradw_evals: Option<u64>,
    pub gradu_evals: Option<u64>,
    pub wall_ms: f64,
}

impl TraceRow {
    pub fn from_nl(record: &EpochRecordNL, seed: u64, algorithm: &str) -> Self {
        Self {
            epoch: record.epoch,
            seed,
            algorithm: algorithm.to_string(),
            objective: Some(record.psi_gamma),
            grad_map_norm: Some(record.grad_map_norm),
            gamma: Some(record.gamma),
            f_evals: Some(record.f_evals),
            jac_evals: Some(record.jac_evals),
            gradw_evals: None,
            gradu_evals: None,
            wall_ms: record.wall.as_secs_f64() * 1e3,
        }
    }

    pub fn from_nc(record: &EpochRecordNC, seed: u64, algorithm: &str) -> Self {
        Self {
            epoch: record.epoch,
            seed,
            algorithm: algorithm.to_string(),
            objective: Some(record.objective),
            grad_map_norm: Some(record.grad_map_norm_w),
            gamma: None,
            f_evals: None,
            jac_evals: None,
            gradw_evals: Some(record.gradw_evals),
            gradu_evals: Some(record.gradu_evals),
            wall_ms: record.wall.as_secs_f64() * 1e3,
        }
    }

    /// CSV line without a trailing newline; `with_wall = false` leaves `wall_ms` empty.
    pub fn to_csv(&self, with_wall: bool) -> String {
        let mut line = format!("{},{},{}", self.epoch, self.seed, self.algorithm);
        let cells = [
            real_cell(self.objective),
            real_cell(self.grad_map_norm),
            real_cell(self.gamma),
            count_cell(self.f_evals),
            count_cell(self.jac_evals),
            count_cell(self.gradw_evals),
            count_cell(self.gradu_evals),
            if with_wall {
                real_cell(Some(self.wall_ms))
            } else {
                String::new()
            },
        ];
        for cell in cells {
            let _ = write!(line, ",{cell}");
        }
        line
    }
}

/// Shortest decimal that round-trips to the same `f64`; empty for missing or NaN.
pub fn real_cell(value: Option<f64>) -> String {
    match value {
        Some(v) if !v.is_nan() => format!("{v:?}"),
        _ => String::new(),
    }
}

fn count_cell(value: Option<u64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the header and rows, flushing after each row.
pub fn write_csv<W: Write>(out: &mut W, rows: &[TraceRow], with_wall: bool) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.to_csv(with_wall))?;
        out.flush()?;
    }
    Ok(())
}

/// Whole trace as a string.
pub fn to_csv_string(rows: &[TraceRow], with_wall: bool) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows, with_wall).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}
