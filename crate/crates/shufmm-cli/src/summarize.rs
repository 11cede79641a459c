//! Per-algorithm statistics over one or more trace files.

use crate::error::{CliError, Result};
use crate::runner::median;
use shufmm::trace::{real_cell, TRACE_HEADER};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Default)]
struct SeedStats {
    last_epoch: usize,
    final_objective: Option<f64>,
    min_grad_map_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub seeds: usize,
    pub max_epoch: usize,
    pub median_final_objective: Option<f64>,
    pub median_min_grad_map_norm: Option<f64>,
}

fn optional_real(cell: &str) -> std::result::Result<Option<f64>, String> {
    if cell.is_empty() {
        Ok(None)
    } else {
        cell.parse::<f64>()
            .map(Some)
            .map_err(|_| format!("invalid number `{cell}`"))
    }
}

/// Aggregates trace files by algorithm; a `(file, algorithm, seed)` triple is one run.
pub fn summarize_traces(paths: &[impl AsRef<Path>]) -> Result<Vec<AlgorithmSummary>> {
    let mut runs: BTreeMap<String, BTreeMap<(usize, u64), SeedStats>> = BTreeMap::new();
    let expected: Vec<&str> = TRACE_HEADER.split(',').collect();
    for (file_idx, path) in paths.iter().enumerate() {
        let path = path.as_ref();
        let trace_err = |message: String| CliError::Trace {
            path: path.to_path_buf(),
            message,
        };
        let mut reader = csv::Reader::from_path(path).map_err(|e| trace_err(e.to_string()))?;
        let header = reader
            .headers()
            .map_err(|e| trace_err(e.to_string()))?
            .clone();
        if header.iter().collect::<Vec<_>>() != expected {
            return Err(trace_err(format!(
                "unexpected header, expected `{TRACE_HEADER}`"
            )));
        }
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| trace_err(e.to_string()))?;
            let at = |m: String| trace_err(format!("row {}: {m}", line + 1));
            let epoch: usize = record[0].parse().map_err(|_| at("invalid epoch".into()))?;
            let seed: u64 = record[1].parse().map_err(|_| at("invalid seed".into()))?;
            let objective = optional_real(&record[3]).map_err(at)?;
            let grad = optional_real(&record[4]).map_err(at)?;
            let stats = runs
                .entry(record[2].to_string())
                .or_default()
                .entry((file_idx, seed))
                .or_default();
            if epoch >= stats.last_epoch {
                stats.last_epoch = epoch;
                stats.final_objective = objective;
            }
            if let Some(g) = grad.filter(|g| g.is_finite()) {
                stats.min_grad_map_norm = Some(stats.min_grad_map_norm.map_or(g, |m| m.min(g)));
            }
        }
    }
    Ok(runs
        .into_iter()
        .map(|(algorithm, seeds)| AlgorithmSummary {
            seeds: seeds.len(),
            max_epoch: seeds.values().map(|s| s.last_epoch).max().unwrap_or(0),
            median_final_objective: median(seeds.values().filter_map(|s| s.final_objective)),
            median_min_grad_map_norm: median(seeds.values().filter_map(|s| s.min_grad_map_norm)),
            algorithm,
        })
        .collect())
}

/// Whitespace-aligned table of the summaries.
pub fn format_table(summaries: &[AlgorithmSummary]) -> String {
    let mut out = format!(
        "{:<16} {:>6} {:>10} {:>24} {:>24}\n",
        "algorithm", "runs", "max_epoch", "median_final_objective", "median_min_grad_norm"
    );
    for s in summaries {
        let _ = writeln!(
            out,
            "{:<16} {:>6} {:>10} {:>24} {:>24}",
            s.algorithm,
            s.seeds,
            s.max_epoch,
            real_cell(s.median_final_objective),
            real_cell(s.median_min_grad_map_norm)
        );
    }
    out
}
