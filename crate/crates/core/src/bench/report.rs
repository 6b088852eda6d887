//! CSV tables and the JSON metadata sidecar.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{RunRecord, RunSpec, WARMUP_RUNS, PHASE_COLUMNS};
use crate::error::{FftError, Result};

/// Fixed column order of the emitted table.
pub const CSV_HEADER: [&str; 12] = [
    "extents",
    "strategy",
    "rigor",
    "workers",
    "n_locs",
    "transport",
    "phase",
    "median_s",
    "min_s",
    "max_s",
    "repetitions",
    "planning_time_s",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub extents: String,
    pub strategy: String,
    pub rigor: String,
    pub workers: usize,
    pub n_locs: usize,
    pub transport: String,
    pub phase: String,
    pub median_s: f64,
    pub min_s: f64,
    pub max_s: f64,
    pub repetitions: usize,
    pub planning_time_s: f64,
}

fn output_err(e: impl std::fmt::Display) -> FftError {
    FftError::Output(e.to_string())
}

/// One row per record and phase, records in the given order, phases in
/// [`PHASE_COLUMNS`] order.
pub fn csv_rows(records: &[RunRecord]) -> Result<Vec<CsvRow>> {
    let mut rows = Vec::with_capacity(records.len() * PHASE_COLUMNS.len());
    for r in records {
        for (phase, s) in PHASE_COLUMNS.iter().zip(r.aggregates()?) {
            rows.push(CsvRow {
                extents: r.extents.to_string(),
                strategy: r.strategy.clone(),
                rigor: r.rigor.clone(),
                workers: r.workers,
                n_locs: r.n_locs,
                transport: r.transport.clone(),
                phase: phase.to_string(),
                median_s: s.median,
                min_s: s.min,
                max_s: s.max,
                repetitions: r.repetitions.len(),
                planning_time_s: r.planning_time,
            });
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER).map_err(output_err)?;
    for row in csv_rows(records)? {
        w.serialize(row).map_err(output_err)?;
    }
    w.flush().map_err(output_err)
}

pub fn emit_csv(records: &[RunRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(records, &mut buf)?;
    String::from_utf8(buf).map_err(output_err)
}

/// Parses a table written by [`write_csv`], checking the header.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(output_err)?;
    if header.iter().ne(CSV_HEADER) {
        return Err(FftError::Output(format!("unexpected CSV header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(output_err)).collect()
}

/// Run conditions that are not part of the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub crate_version: String,
    pub extents: String,
    pub seed: u64,
    pub repetitions: usize,
    pub warmup_runs: usize,
    pub median_convention: String,
    pub process_model: String,
    pub timer: String,
    pub available_parallelism: usize,
    pub records: usize,
}

impl RunMetadata {
    pub fn describe(spec: &RunSpec, records: usize) -> Self {
        RunMetadata {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            extents: spec.extents.to_string(),
            seed: spec.seed,
            repetitions: spec.repetitions,
            warmup_runs: WARMUP_RUNS,
            median_convention: "even counts use the mean of the two central values".into(),
            process_model: "all repetitions of a sweep point share one process".into(),
            timer: "monotonic wall clock, seconds".into(),
            available_parallelism: std::thread::available_parallelism().map_or(1, usize::from),
            records,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(output_err)
    }
}
