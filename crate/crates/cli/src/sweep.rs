//! Grid sweeps over `(delta, L, c0)` written as CSV, one row per cell.
//!
//! Cells already present in the output file are skipped, so an interrupted
//! sweep resumes where it stopped. Each cell's seed depends only on the
//! master seed and the cell's own parameters, so growing the grid leaves
//! finished cells valid.

use std::collections::BTreeSet;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use septrace::rng::mix;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::experiment::{run_experiment, ExperimentConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    #[serde(rename = "L")]
    pub l: usize,
    pub c0: f64,
    pub n: usize,
    pub t: usize,
    pub repetitions: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub coarse_reps: usize,
    pub fine_traces: usize,
    pub t_traces: usize,
    pub traces_per_repetition: usize,
    pub cell_seed: u64,
}

pub struct Grid {
    pub deltas: Vec<f64>,
    pub ls: Vec<usize>,
    pub c0s: Vec<f64>,
    /// Fixed `t`; the default density `n / (2 (L + 1))` otherwise.
    pub t: Option<usize>,
}

fn cell_key(delta: f64, l: usize, c0: f64) -> (u64, usize, u64) {
    (delta.to_bits(), l, c0.to_bits())
}

fn completed(path: &Path) -> CliResult<BTreeSet<(u64, usize, u64)>> {
    if !path.exists() {
        return Ok(BTreeSet::new());
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::parse(path, e.to_string()))?;
    reader
        .deserialize::<SweepRow>()
        .map(|row| {
            row.map(|r| cell_key(r.delta, r.l, r.c0))
                .map_err(|e| CliError::parse(path, e.to_string()))
        })
        .collect()
}

fn row_line(row: &SweepRow, with_header: bool) -> CliResult<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(with_header)
        .from_writer(Vec::new());
    w.serialize(row).map_err(|e| CliError::Failed(e.to_string()))?;
    w.into_inner().map_err(|e| CliError::Failed(e.to_string()))
}

/// Runs every missing cell of the grid, appending each row to `out` as soon
/// as the cell finishes. Returns the rows computed in this call.
pub fn run_sweep(base: &ExperimentConfig, grid: &Grid, out: &Path) -> CliResult<Vec<SweepRow>> {
    let done = completed(out)?;
    let mut rows = Vec::new();
    let cells = grid.deltas.iter().flat_map(|&d| {
        grid.ls
            .iter()
            .flat_map(move |&l| grid.c0s.iter().map(move |&c| (d, l, c)))
    });
    for (delta, l, c0) in cells {
        if done.contains(&cell_key(delta, l, c0)) {
            log::info!("skipping finished cell delta={delta} L={l} c0={c0}");
            continue;
        }
        let cell_seed = mix(mix(mix(base.master_seed, delta.to_bits()), l as u64), c0.to_bits());
        let cfg = ExperimentConfig {
            delta,
            l,
            c0,
            t: grid.t,
            master_seed: cell_seed,
            ..base.clone()
        };
        let (report, _) = run_experiment(&cfg)?;
        let row = SweepRow {
            delta,
            l,
            c0,
            n: cfg.n,
            t: cfg.t(),
            repetitions: report.aggregate.repetitions,
            successes: report.aggregate.successes,
            success_rate: report.aggregate.success_rate,
            coarse_reps: cfg.coarse_reps,
            fine_traces: cfg.fine_traces,
            t_traces: cfg.t_traces,
            traces_per_repetition: cfg.trace_budget(),
            cell_seed,
        };
        let fresh = !out.exists() || std::fs::metadata(out).map(|m| m.len() == 0).unwrap_or(true);
        let bytes = row_line(&row, fresh)?;
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(out)
            .map_err(|e| CliError::io(out, e))?;
        file.write_all(&bytes)
            .and_then(|_| file.sync_data())
            .map_err(|e| CliError::io(out, e))?;
        rows.push(row);
    }
    Ok(rows)
}
