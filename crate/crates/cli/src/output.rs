//! CSV and JSON artifacts. Floats are written as `{:.16e}`, 17 significant
//! digits, which reads back to the identical `f64`.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use mmab_core::{AggregateCurve, CurvePoint, ExperimentConfig, RunRecord};
use serde::Serialize;
use thiserror::Error;

pub const RUNS_HEADER: [&str; 3] = ["run_id", "slot", "cumulative_regret"];
pub const AGGREGATE_HEADER: [&str; 4] = ["slot", "mean", "lower95", "upper95"];
pub const CI_METHOD: &str = "normal approximation: mean +/- 1.96 * sample sd / sqrt(runs)";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("nothing to write to {0}")]
    Empty(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> OutputError + '_ {
    move |source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn malformed(path: &Path, reason: impl Into<String>) -> OutputError {
    OutputError::Malformed {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_float(path: &Path, s: &str) -> Result<f64, OutputError> {
    s.parse()
        .map_err(|_| malformed(path, format!("bad number {s:?}")))
}

fn parse_int(path: &Path, s: &str) -> Result<u64, OutputError> {
    s.parse()
        .map_err(|_| malformed(path, format!("bad integer {s:?}")))
}

/// One row per (run, checkpoint).
pub fn write_runs_csv(records: &[RunRecord], path: &Path) -> Result<(), OutputError> {
    if records.iter().all(|r| r.checkpoints.is_empty()) {
        return Err(OutputError::Empty(path.to_path_buf()));
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(RUNS_HEADER).map_err(csv_err(path))?;
    for r in records {
        for &(slot, regret) in &r.checkpoints {
            w.write_record([r.run_id.to_string(), slot.to_string(), format_float(regret)])
                .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

/// Reads records back; success flags and assignments are not stored and
/// come back as `false` and empty.
pub fn read_runs_csv(path: &Path) -> Result<Vec<RunRecord>, OutputError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    if r.headers().map_err(csv_err(path))? != RUNS_HEADER.as_slice() {
        return Err(malformed(path, "unexpected header"));
    }
    let mut records: Vec<RunRecord> = Vec::new();
    for row in r.records() {
        let row = row.map_err(csv_err(path))?;
        let run_id = parse_int(path, &row[0])?;
        let point = (parse_int(path, &row[1])?, parse_float(path, &row[2])?);
        match records.last_mut() {
            Some(last) if last.run_id == run_id => last.checkpoints.push(point),
            _ => records.push(RunRecord {
                run_id,
                checkpoints: vec![point],
                success: false,
                assignments: Vec::new(),
            }),
        }
    }
    Ok(records)
}

/// `slot,mean,lower95,upper95`; the interval columns are empty when the
/// curve has no interval.
pub fn write_aggregate_csv(curve: &AggregateCurve, path: &Path) -> Result<(), OutputError> {
    if curve.points.is_empty() {
        return Err(OutputError::Empty(path.to_path_buf()));
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(AGGREGATE_HEADER).map_err(csv_err(path))?;
    for p in &curve.points {
        let bound = |b: Option<f64>| b.map(format_float).unwrap_or_default();
        w.write_record([
            p.slot.to_string(),
            format_float(p.mean),
            bound(p.lower95()),
            bound(p.upper95()),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_aggregate_csv(path: &Path, runs: usize) -> Result<AggregateCurve, OutputError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    if r.headers().map_err(csv_err(path))? != AGGREGATE_HEADER.as_slice() {
        return Err(malformed(path, "unexpected header"));
    }
    let mut points = Vec::new();
    for row in r.records() {
        let row = row.map_err(csv_err(path))?;
        let interval = match (&row[2], &row[3]) {
            ("", "") => None,
            (l, u) => Some((parse_float(path, l)?, parse_float(path, u)?)),
        };
        points.push(CurvePoint {
            slot: parse_int(path, &row[0])?,
            mean: parse_float(path, &row[1])?,
            interval,
        });
    }
    Ok(AggregateCurve { runs, points })
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata<'a> {
    pub config: &'a ExperimentConfig,
    pub means: Vec<f64>,
    pub runs: usize,
    pub successful_assignments: usize,
    pub final_mean_regret: f64,
    pub ci_method: &'static str,
    pub ci_available: bool,
    pub files: Vec<String>,
}

pub fn write_metadata(meta: &Metadata<'_>, path: &Path) -> Result<(), OutputError> {
    let mut f = File::create(path).map_err(io_err(path))?;
    serde_json::to_writer_pretty(&mut f, meta).map_err(|e| OutputError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    writeln!(f).map_err(io_err(path))
}
