#![allow(dead_code)]

use mmab_core::seed::{env_seed, player_seed};
use mmab_core::{ArmMeans, Environment, ProposedPlayer, Simulation, StageKind};

pub fn linear(k: usize, top: f64, bottom: f64) -> Vec<f64> {
    mmab_core::linear_means(k, top, bottom)
        .unwrap()
        .as_slice()
        .to_vec()
}

/// Proposed players with a fixed δ, seeded from `(master, run)`.
pub fn proposed(
    means: &[f64],
    players: usize,
    delta: f64,
    horizon: u64,
    master: u64,
    run: u64,
) -> Simulation<ProposedPlayer> {
    let env = Environment::new(
        ArmMeans::new(means.to_vec()).unwrap(),
        players,
        env_seed(master, run),
    )
    .unwrap();
    let team = (0..players)
        .map(|_| ProposedPlayer::with_delta(delta).unwrap())
        .collect();
    let seeds: Vec<u64> = (0..players as u64)
        .map(|p| player_seed(master, run, p))
        .collect();
    Simulation::new(env, team, &seeds, horizon)
}

/// Steps until every player has left `stage` (or aborted), up to `limit`.
pub fn run_past(sim: &mut Simulation<ProposedPlayer>, stage: StageKind, limit: u64) {
    sim.run_until(limit, |s| s.players().iter().all(|p| p.stage() > stage));
}

pub fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}
