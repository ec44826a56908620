//! Seeded batches of simulations and their aggregation into regret curves.
//!
//! Run `r` of an experiment draws its environment seed and every player's
//! seed from `(master_seed, r)` alone, so records never depend on execution
//! order or on how many threads run them.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Arm, ArmMeans, EnvError, Environment, Reward};
use crate::policy::{PinnedPolicy, Policy, UniformPolicy};
use crate::protocol::ProposedPlayer;
use crate::seed::{env_seed, player_seed};

/// Checkpoints per run unless configured otherwise.
pub const DEFAULT_CHECKPOINTS: usize = 500;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("no runs to aggregate")]
    NoRuns,
    #[error("run {run_id} has checkpoints that differ from run 0")]
    MismatchedCheckpoints { run_id: u64 },
}

fn invalid(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

/// µ_(k) = top + (k−1)/(K−1)·(bottom − top), best arm first; both
/// endpoints are reproduced exactly.
pub fn linear_means(arms: usize, top: f64, bottom: f64) -> Result<ArmMeans, ExperimentError> {
    if arms < 2 {
        return Err(invalid(format!(
            "a linear profile needs K >= 2, got {arms}"
        )));
    }
    if !(0.0..=1.0).contains(&top) || !(0.0..=1.0).contains(&bottom) {
        return Err(invalid("linear profile endpoints must lie in [0, 1]"));
    }
    if top < bottom {
        return Err(invalid(format!("mu_top {top} is below mu_bottom {bottom}")));
    }
    let span = (arms - 1) as f64;
    let means = (0..arms)
        .map(|k| {
            let f = k as f64 / span;
            top * (1.0 - f) + bottom * f
        })
        .collect();
    Ok(ArmMeans::new(means)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MeanProfile {
    Explicit(Vec<f64>),
    Linear { top: f64, bottom: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Proposed,
    Oracle,
    Uniform,
}

impl FromStr for PolicyKind {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "proposed" => Ok(PolicyKind::Proposed),
            "oracle" => Ok(PolicyKind::Oracle),
            "uniform" => Ok(PolicyKind::Uniform),
            other => Err(invalid(format!(
                "unknown policy {other:?} (expected proposed, oracle or uniform)"
            ))),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Proposed => "proposed",
            PolicyKind::Oracle => "oracle",
            PolicyKind::Uniform => "uniform",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub arms: usize,
    pub players: usize,
    pub horizon: u64,
    pub means: MeanProfile,
    pub runs: usize,
    pub master_seed: u64,
    pub policy: PolicyKind,
    pub checkpoints: usize,
    pub output_path: PathBuf,
}

impl ExperimentConfig {
    /// Linear profile between `top` and `bottom`, proposed policy, 20 runs.
    pub fn linear(arms: usize, players: usize, horizon: u64, top: f64, bottom: f64) -> Self {
        ExperimentConfig {
            arms,
            players,
            horizon,
            means: MeanProfile::Linear { top, bottom },
            runs: 20,
            master_seed: 0,
            policy: PolicyKind::Proposed,
            checkpoints: DEFAULT_CHECKPOINTS,
            output_path: PathBuf::from("out"),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.players == 0 || self.players >= self.arms {
            return Err(invalid(format!(
                "need 1 <= M < K, got M = {} and K = {}",
                self.players, self.arms
            )));
        }
        if self.horizon == 0 {
            return Err(invalid("T must be positive"));
        }
        if self.runs == 0 {
            return Err(invalid("runs must be at least 1"));
        }
        if self.checkpoints < 2 {
            return Err(invalid("checkpoints must be at least 2"));
        }
        self.arm_means().map(|_| ())
    }

    pub fn arm_means(&self) -> Result<ArmMeans, ExperimentError> {
        match &self.means {
            MeanProfile::Explicit(v) => {
                if v.len() != self.arms {
                    return Err(invalid(format!(
                        "{} means given for K = {}",
                        v.len(),
                        self.arms
                    )));
                }
                Ok(ArmMeans::new(v.clone())?)
            }
            MeanProfile::Linear { top, bottom } => linear_means(self.arms, *top, *bottom),
        }
    }

    /// Evenly spaced slots at which cumulative regret is recorded; the last
    /// one is always the horizon.
    pub fn checkpoint_slots(&self) -> Vec<u64> {
        let c = self.checkpoints.max(1) as u128;
        let t = self.horizon as u128;
        let mut slots: Vec<u64> = (1..=c)
            .map(|i| (i * t / c) as u64)
            .filter(|&s| s > 0)
            .collect();
        slots.dedup();
        slots
    }
}

/// Outcome of one simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: u64,
    /// (slot, cumulative pseudo-regret) pairs.
    pub checkpoints: Vec<(u64, f64)>,
    /// Every player ended on a distinct top-M arm without a protocol fault.
    pub success: bool,
    /// Per player, one-based arm numbers; `None` for players that never
    /// committed.
    pub assignments: Vec<Option<usize>>,
}

impl RunRecord {
    pub fn final_regret(&self) -> f64 {
        self.checkpoints.last().map_or(0.0, |&(_, r)| r)
    }
}

/// An environment and its players stepped in lockstep.
pub struct Simulation<P> {
    env: Environment,
    players: Vec<P>,
    choices: Vec<Arm>,
    rewards: Vec<Reward>,
}

impl<P: Policy> Simulation<P> {
    /// Resets every player with its own seed and the shared (K, T).
    pub fn new(env: Environment, mut players: Vec<P>, seeds: &[u64], horizon: u64) -> Self {
        assert_eq!(players.len(), env.num_players(), "one policy per player");
        assert_eq!(seeds.len(), players.len(), "one seed per player");
        let k = env.num_arms();
        for (p, &s) in players.iter_mut().zip(seeds) {
            p.reset(s, k, horizon);
        }
        let m = players.len();
        Simulation {
            env,
            players,
            choices: vec![Arm::new(0); m],
            rewards: vec![0; m],
        }
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn env_mut(&mut self) -> &mut Environment {
        &mut self.env
    }

    pub fn players(&self) -> &[P] {
        &self.players
    }

    pub fn slot(&self) -> u64 {
        self.env.slot()
    }

    /// Last slot's choices.
    pub fn choices(&self) -> &[Arm] {
        &self.choices
    }

    pub fn step(&mut self) {
        let slot = self.env.slot();
        for (c, p) in self.choices.iter_mut().zip(self.players.iter_mut()) {
            *c = p.act(slot);
        }
        self.env
            .step_into(&self.choices, &mut self.rewards)
            .expect("policies only return arms below K");
        for (p, &r) in self.players.iter_mut().zip(&self.rewards) {
            p.observe(r);
        }
    }

    /// Steps until `stop` holds or `limit` slots have been played.
    pub fn run_until(&mut self, limit: u64, mut stop: impl FnMut(&Self) -> bool) {
        while self.env.slot() < limit && !stop(self) {
            self.step();
        }
    }

    /// Steps to `horizon`, checkpointing at the given slots.
    pub fn run_with_checkpoints(&mut self, horizon: u64, slots: &[u64]) {
        let mut next = slots.iter().peekable();
        while self.env.slot() < horizon {
            self.step();
            if next.peek().is_some_and(|&&s| s == self.env.slot()) {
                self.env.checkpoint();
                next.next();
            }
        }
    }

    pub fn into_players(self) -> (Environment, Vec<P>) {
        (self.env, self.players)
    }
}

fn make_policies(config: &ExperimentConfig, means: &ArmMeans) -> Vec<Box<dyn Policy>> {
    match config.policy {
        PolicyKind::Proposed => (0..config.players)
            .map(|_| Box::new(ProposedPlayer::new()) as Box<dyn Policy>)
            .collect(),
        PolicyKind::Uniform => (0..config.players)
            .map(|_| Box::new(UniformPolicy::new()) as Box<dyn Policy>)
            .collect(),
        PolicyKind::Oracle => means
            .ranking()
            .into_iter()
            .take(config.players)
            .map(|arm| Box::new(PinnedPolicy::new(arm)) as Box<dyn Policy>)
            .collect(),
    }
}

impl Policy for Box<dyn Policy> {
    fn reset(&mut self, seed: u64, arms: usize, horizon: u64) {
        (**self).reset(seed, arms, horizon)
    }

    fn act(&mut self, slot: u64) -> Arm {
        (**self).act(slot)
    }

    fn observe(&mut self, reward: Reward) {
        (**self).observe(reward)
    }

    fn assignment(&self) -> Option<Arm> {
        (**self).assignment()
    }

    fn aborted(&self) -> bool {
        (**self).aborted()
    }
}

/// True when every player holds a distinct top-M arm and none aborted.
pub fn assignment_is_optimal<P: Policy>(means: &ArmMeans, players: &[P]) -> bool {
    let mut arms = Vec::with_capacity(players.len());
    for p in players {
        match p.assignment() {
            Some(a) if !p.aborted() && means.is_top(a, players.len()) => arms.push(a),
            _ => return false,
        }
    }
    arms.sort_unstable();
    arms.dedup();
    arms.len() == players.len()
}

/// Player seeds of run `run_id`.
pub fn run_seeds(master_seed: u64, run_id: u64, players: usize) -> Vec<u64> {
    (0..players as u64)
        .map(|p| player_seed(master_seed, run_id, p))
        .collect()
}

/// Plays run `run_id` of `config` to the horizon.
pub fn simulate_run(config: &ExperimentConfig, run_id: u64) -> Result<RunRecord, ExperimentError> {
    let means = config.arm_means()?;
    let env = Environment::new(
        means.clone(),
        config.players,
        env_seed(config.master_seed, run_id),
    )?;
    let seeds = run_seeds(config.master_seed, run_id, config.players);
    let mut sim = Simulation::new(env, make_policies(config, &means), &seeds, config.horizon);
    sim.run_with_checkpoints(config.horizon, &config.checkpoint_slots());
    let (env, players) = sim.into_players();
    Ok(RunRecord {
        run_id,
        checkpoints: env.ledger().checkpoints().to_vec(),
        success: assignment_is_optimal(&means, &players),
        assignments: players
            .iter()
            .map(|p| p.assignment().map(Arm::number))
            .collect(),
    })
}

/// Runs every run of `config` in parallel; records come back ordered by run id.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>, ExperimentError> {
    config.validate()?;
    (0..config.runs as u64)
        .into_par_iter()
        .map(|r| simulate_run(config, r))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub slot: u64,
    pub mean: f64,
    /// 95% normal-approximation interval; absent with a single run.
    pub interval: Option<(f64, f64)>,
}

impl CurvePoint {
    pub fn lower95(&self) -> Option<f64> {
        self.interval.map(|(l, _)| l)
    }

    pub fn upper95(&self) -> Option<f64> {
        self.interval.map(|(_, u)| u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCurve {
    pub runs: usize,
    pub points: Vec<CurvePoint>,
}

impl AggregateCurve {
    pub fn has_interval(&self) -> bool {
        self.runs >= 2
    }
}

/// Mean and half-width 1.96·s/√n of `values`; the half-width is `None`
/// below two values.
pub fn mean_and_half_width(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(Z_95 * var.sqrt() / n.sqrt()))
}

/// Per-checkpoint mean and 95% interval across runs.
pub fn aggregate(records: &[RunRecord]) -> Result<AggregateCurve, ExperimentError> {
    let first = records.first().ok_or(ExperimentError::NoRuns)?;
    for r in records {
        let same = r.checkpoints.len() == first.checkpoints.len()
            && r.checkpoints
                .iter()
                .zip(&first.checkpoints)
                .all(|(a, b)| a.0 == b.0);
        if !same {
            return Err(ExperimentError::MismatchedCheckpoints { run_id: r.run_id });
        }
    }
    let mut column = Vec::with_capacity(records.len());
    let points = first
        .checkpoints
        .iter()
        .enumerate()
        .map(|(i, &(slot, _))| {
            column.clear();
            column.extend(records.iter().map(|r| r.checkpoints[i].1));
            let (mean, half) = mean_and_half_width(&column);
            CurvePoint {
                slot,
                mean,
                interval: half.map(|h| (mean - h, mean + h)),
            }
        })
        .collect();
    Ok(AggregateCurve {
        runs: records.len(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(run_id: u64, values: &[f64]) -> RunRecord {
        RunRecord {
            run_id,
            checkpoints: values
                .iter()
                .enumerate()
                .map(|(i, &v)| (i as u64 + 1, v))
                .collect(),
            success: false,
            assignments: vec![],
        }
    }

    #[test]
    fn linear_profile_examples() {
        let m = linear_means(5, 1.0, 0.01).unwrap();
        let expected = [1.0, 0.7525, 0.505, 0.2575, 0.01];
        for (got, want) in m.as_slice().iter().zip(expected) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(linear_means(2, 0.8, 0.2).unwrap().as_slice(), &[0.8, 0.2]);
        assert_eq!(linear_means(4, 0.5, 0.5).unwrap().as_slice(), &[0.5; 4]);
        assert!(linear_means(1, 0.5, 0.5).is_err());
        assert!(linear_means(3, 0.2, 0.5).is_err());
        assert!(linear_means(3, 1.5, 0.5).is_err());
    }

    #[test]
    fn aggregate_textbook_interval() {
        let recs = [record(0, &[10.0]), record(1, &[12.0]), record(2, &[14.0])];
        let c = aggregate(&recs).unwrap();
        let p = c.points[0];
        assert_eq!(p.mean, 12.0);
        let half = p.upper95().unwrap() - p.mean;
        assert!((half - 1.96 * 2.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!((half - 2.263).abs() < 1e-3);
    }

    #[test]
    fn aggregate_degenerate_cases() {
        let same = [record(0, &[3.0, 4.0]), record(1, &[3.0, 4.0])];
        let c = aggregate(&same).unwrap();
        assert!(c
            .points
            .iter()
            .all(|p| p.interval == Some((p.mean, p.mean))));

        let single = aggregate(&[record(0, &[1.0, 2.0])]).unwrap();
        assert!(!single.has_interval());
        assert!(single.points.iter().all(|p| p.interval.is_none()));

        assert_eq!(aggregate(&[]), Err(ExperimentError::NoRuns));
        let bad = [record(0, &[1.0, 2.0]), record(1, &[1.0])];
        assert_eq!(
            aggregate(&bad),
            Err(ExperimentError::MismatchedCheckpoints { run_id: 1 })
        );
    }

    #[test]
    fn checkpoint_slots_spacing() {
        let mut c = ExperimentConfig::linear(3, 1, 1000, 0.9, 0.1);
        c.checkpoints = 4;
        assert_eq!(c.checkpoint_slots(), vec![250, 500, 750, 1000]);
        c.horizon = 3;
        c.checkpoints = 10;
        assert_eq!(c.checkpoint_slots(), vec![1, 2, 3]);
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::linear(3, 3, 100, 0.9, 0.1);
        assert!(c.validate().is_err());
        c.players = 2;
        assert!(c.validate().is_ok());
        c.checkpoints = 1;
        assert!(c.validate().is_err());
        c.checkpoints = 2;
        c.means = MeanProfile::Explicit(vec![0.5, 0.2]);
        assert!(c.validate().is_err());
        c.means = MeanProfile::Explicit(vec![0.5, 0.2, 1.1]);
        assert!(c.validate().is_err());
        assert_eq!(
            "Uniform".parse::<PolicyKind>().unwrap(),
            PolicyKind::Uniform
        );
        assert!("greedy".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn oracle_runs_have_zero_regret() {
        let mut c = ExperimentConfig::linear(6, 3, 2_000, 0.9, 0.05);
        c.policy = PolicyKind::Oracle;
        c.runs = 3;
        for r in run_experiment(&c).unwrap() {
            assert!(r.checkpoints.iter().all(|&(_, v)| v == 0.0));
            assert!(r.success);
        }
    }

    #[test]
    fn records_are_reproducible() {
        let mut c = ExperimentConfig::linear(4, 2, 3_000, 0.9, 0.1);
        c.policy = PolicyKind::Uniform;
        c.runs = 3;
        c.checkpoints = 10;
        let a = run_experiment(&c).unwrap();
        let b = run_experiment(&c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[2], simulate_run(&c, 2).unwrap());
        for r in &a {
            assert!(r.checkpoints.windows(2).all(|w| w[0].1 <= w[1].1));
            assert_eq!(r.checkpoints.last().unwrap().0, 3_000);
        }
    }
}
