//! CSV and JSON writers and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;
use ttpeel_hovd::OrderStats;

use crate::experiments::HilbertRow;

/// Pretty JSON with keys sorted at every level, newline-terminated.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json's default map is ordered by key
    let v: Value = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_sorted_json(value)?)?;
    Ok(())
}

fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct HilbertCsvRow<'a> {
    rank: usize,
    method: &'a str,
    rel_error: f64,
    actions: u64,
}

pub fn write_hilbert_csv(path: &Path, rows: &[HilbertRow]) -> Result<()> {
    write_csv(
        path,
        rows.iter().map(|r| HilbertCsvRow {
            rank: r.rank,
            method: r.method.name(),
            rel_error: r.rel_error,
            actions: r.actions,
        }),
    )
}

pub fn write_stats_csv(path: &Path, stats: &[OrderStats]) -> Result<()> {
    write_csv(path, stats.iter())
}

#[derive(Serialize)]
struct SampleRow {
    sample: usize,
    order: usize,
    error: f64,
}

pub fn write_samples_csv(path: &Path, errors: &[Vec<f64>]) -> Result<()> {
    write_csv(
        path,
        errors.iter().enumerate().flat_map(|(sample, e)| {
            e.iter()
                .enumerate()
                .map(move |(order, &error)| SampleRow { sample, order, error })
        }),
    )
}

/// Record of one command invocation, written next to its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub seed: u64,
    pub threads: usize,
    pub versions: Value,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub wall_seconds: f64,
    /// Per-item timings, when the command has any.
    pub timings: Value,
    pub outputs: Vec<PathBuf>,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn versions() -> Value {
    serde_json::json!({
        "ttpeel": env!("CARGO_PKG_VERSION"),
        "faer": "0.24",
    })
}

pub const MANIFEST_FILE: &str = "manifest.json";
