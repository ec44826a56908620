//! Experiment runner behind the `mmab` binary: resolve a config, run the
//! seeded batch, and write CSV, JSON and plot artifacts.

pub mod config;
pub mod output;
pub mod plot;

use std::fs;
use std::path::{Path, PathBuf};

use mmab_core::{aggregate, run_experiment, AggregateCurve, ExperimentError, RunRecord};
use thiserror::Error;

pub use config::{resolve, ConfigError, ConfigFile, Overrides, RunPlan};
pub use output::{
    read_aggregate_csv, read_runs_csv, write_aggregate_csv, write_runs_csv, OutputError,
};
pub use plot::{emit_plot, PlotError};

pub const RUNS_FILE: &str = "runs.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const METADATA_FILE: &str = "metadata.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error("cannot create output directory {path}: {source}")]
    CreateDir {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for configuration problems, 2 for output failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Plot(PlotError::UnsupportedFormat(_)) => 1,
            _ => 2,
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        CliError::Config(e.into())
    }
}

/// Reads and resolves a config file; a missing file counts as a config
/// error.
pub fn load_plan(path: Option<&Path>, overrides: &Overrides) -> Result<RunPlan, CliError> {
    let file = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| ConfigError::Unreadable {
                path: p.display().to_string(),
                reason: e.to_string(),
            })?;
            ConfigFile::parse(&text)?
        }
        None => ConfigFile::default(),
    };
    Ok(resolve(&file, overrides)?)
}

#[derive(Debug, Clone)]
pub struct Report {
    pub records: Vec<RunRecord>,
    pub curve: AggregateCurve,
    pub files: Vec<PathBuf>,
}

impl Report {
    pub fn successes(&self) -> usize {
        self.records.iter().filter(|r| r.success).count()
    }

    pub fn final_mean_regret(&self) -> f64 {
        self.curve.points.last().map_or(0.0, |p| p.mean)
    }
}

/// Runs the plan and writes runs.csv, aggregate.csv, metadata.json and the
/// plot.
pub fn execute(plan: &RunPlan) -> Result<Report, CliError> {
    let cfg = &plan.experiment;
    if plan
        .plot_path
        .extension()
        .and_then(|e| e.to_str())
        .is_none_or(|e| !matches!(e.to_ascii_lowercase().as_str(), "svg" | "png"))
    {
        return Err(PlotError::UnsupportedFormat(plan.plot_path.clone()).into());
    }
    let means = cfg.arm_means()?;
    let records = run_experiment(cfg)?;
    let curve = aggregate(&records)?;

    let dir = &cfg.output_path;
    fs::create_dir_all(dir).map_err(|source| CliError::CreateDir {
        path: dir.clone(),
        source,
    })?;
    if let Some(parent) = plan
        .plot_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
    {
        fs::create_dir_all(parent).map_err(|source| CliError::CreateDir {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    let runs_path = dir.join(RUNS_FILE);
    let agg_path = dir.join(AGGREGATE_FILE);
    let meta_path = dir.join(METADATA_FILE);
    write_runs_csv(&records, &runs_path)?;
    write_aggregate_csv(&curve, &agg_path)?;
    emit_plot(&curve, &plan.plot_path)?;

    let files = vec![
        runs_path,
        agg_path,
        plan.plot_path.clone(),
        meta_path.clone(),
    ];
    let report = Report {
        records,
        curve,
        files,
    };
    let meta = output::Metadata {
        config: cfg,
        means: means.as_slice().to_vec(),
        runs: report.records.len(),
        successful_assignments: report.successes(),
        final_mean_regret: report.final_mean_regret(),
        ci_method: output::CI_METHOD,
        ci_available: report.curve.has_interval(),
        files: report
            .files
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
    };
    output::write_metadata(&meta, &meta_path)?;
    Ok(report)
}
