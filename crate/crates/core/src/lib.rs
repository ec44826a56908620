//! Multi-player multi-armed bandits without collision sensing.
//!
//! [`env`] simulates the shared bandit, [`signaling`] turns bits into forced
//! collisions on one arm, [`protocol`] is the per-player decentralized
//! algorithm and [`experiment`] runs seeded batches and aggregates regret.

pub mod env;
pub mod experiment;
pub mod policy;
pub mod protocol;
pub mod seed;
pub mod signaling;

pub use env::{Arm, ArmMeans, EnvError, Environment, Observation, RegretLedger, Reward};
pub use experiment::{
    aggregate, assignment_is_optimal, linear_means, run_experiment, simulate_run, AggregateCurve,
    CurvePoint, ExperimentConfig, ExperimentError, MeanProfile, PolicyKind, RunRecord, Simulation,
};
pub use policy::{PinnedPolicy, Policy, UniformPolicy};
pub use protocol::{ProposedPlayer, ProtocolParams, ScheduleOutcome, StageKind};
