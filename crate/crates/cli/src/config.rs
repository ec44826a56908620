//! Flat `key = value` experiment files plus command-line overrides.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are the
//! experiment field names: `K`, `M`, `T`, `means`, `mu_top`, `mu_bottom`,
//! `runs`, `master_seed`, `policy`, `checkpoints`, `output_path`, plus the
//! optional `plot_path`. `means` is a comma-separated list; otherwise the
//! profile is linear between `mu_top` and `mu_bottom`.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use mmab_core::experiment::DEFAULT_CHECKPOINTS;
use mmab_core::{ExperimentConfig, MeanProfile, PolicyKind};
use thiserror::Error;

pub const DEFAULT_RUNS: usize = 20;
pub const DEFAULT_OUTPUT: &str = "results";

const KEYS: [&str; 12] = [
    "K",
    "M",
    "T",
    "means",
    "mu_top",
    "mu_bottom",
    "runs",
    "master_seed",
    "policy",
    "checkpoints",
    "output_path",
    "plot_path",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key {key:?} given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("{key}: cannot parse {value:?}")]
    BadValue { key: String, value: String },
    #[error("missing required key {0:?}")]
    Missing(&'static str),
    #[error("give either `means` or `mu_top`/`mu_bottom`, not both")]
    ConflictingMeans,
    #[error("cannot read config file {path}: {reason}")]
    Unreadable { path: String, reason: String },
    #[error(transparent)]
    Invalid(#[from] mmab_core::ExperimentError),
}

/// Raw key/value pairs of a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: trimmed.to_string(),
                });
            };
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
            if entries
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
        }
        Ok(ConfigFile { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        self.get(key)
            .map(|v| {
                v.parse().map_err(|_| ConfigError::BadValue {
                    key: key.to_string(),
                    value: v.to_string(),
                })
            })
            .transpose()
    }
}

/// Command-line values that win over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub arms: Option<usize>,
    pub players: Option<usize>,
    pub horizon: Option<u64>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub policy: Option<String>,
    pub mu_top: Option<f64>,
    pub mu_bottom: Option<f64>,
    pub out: Option<PathBuf>,
}

/// A validated experiment and where to draw its plot.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub experiment: ExperimentConfig,
    pub plot_path: PathBuf,
}

fn parse_means(text: &str) -> Result<Vec<f64>, ConfigError> {
    text.split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|_| ConfigError::BadValue {
                key: "means".into(),
                value: text.to_string(),
            })
        })
        .collect()
}

/// Merges `file` and `overrides` into a validated plan. Linear endpoints
/// given on the command line replace an explicit `means` list.
pub fn resolve(file: &ConfigFile, overrides: &Overrides) -> Result<RunPlan, ConfigError> {
    let arms = overrides
        .arms
        .or(file.parsed("K")?)
        .ok_or(ConfigError::Missing("K"))?;
    let players = overrides
        .players
        .or(file.parsed("M")?)
        .ok_or(ConfigError::Missing("M"))?;
    let horizon = overrides
        .horizon
        .or(file.parsed("T")?)
        .ok_or(ConfigError::Missing("T"))?;

    let file_top: Option<f64> = file.parsed("mu_top")?;
    let file_bottom: Option<f64> = file.parsed("mu_bottom")?;
    let cli_linear = overrides.mu_top.is_some() || overrides.mu_bottom.is_some();
    let means = match file.get("means") {
        Some(_) if !cli_linear && (file_top.is_some() || file_bottom.is_some()) => {
            return Err(ConfigError::ConflictingMeans)
        }
        Some(list) if !cli_linear => MeanProfile::Explicit(parse_means(list)?),
        _ => MeanProfile::Linear {
            top: overrides
                .mu_top
                .or(file_top)
                .ok_or(ConfigError::Missing("mu_top"))?,
            bottom: overrides
                .mu_bottom
                .or(file_bottom)
                .ok_or(ConfigError::Missing("mu_bottom"))?,
        },
    };

    let policy = match overrides.policy.as_deref().or(file.get("policy")) {
        Some(p) => p.parse::<PolicyKind>()?,
        None => PolicyKind::Proposed,
    };
    let output_path = overrides
        .out
        .clone()
        .or_else(|| file.get("output_path").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
    let plot_path = file
        .get("plot_path")
        .map(PathBuf::from)
        .unwrap_or_else(|| output_path.join("regret.svg"));

    let experiment = ExperimentConfig {
        arms,
        players,
        horizon,
        means,
        runs: overrides
            .runs
            .or(file.parsed("runs")?)
            .unwrap_or(DEFAULT_RUNS),
        master_seed: overrides.seed.or(file.parsed("master_seed")?).unwrap_or(0),
        policy,
        checkpoints: file.parsed("checkpoints")?.unwrap_or(DEFAULT_CHECKPOINTS),
        output_path,
    };
    experiment.validate()?;
    Ok(RunPlan {
        experiment,
        plot_path,
    })
}
