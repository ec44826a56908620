//! Slotted multi-player Bernoulli bandit without collision sensing.
//!
//! Every slot each player names one arm. An arm chosen by two or more players
//! is collided and pays nothing to any of them; otherwise the player receives
//! the slot's Bernoulli draw for that arm. Players only ever see their own
//! reward. The environment also keeps the pseudo-regret ledger, accounted with
//! the true means rather than realized rewards.

use std::fmt;

use thiserror::Error;

use crate::seed::keyed_uniform;

/// A single binary reward.
pub type Reward = u8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("at least two arms are required, got {0}")]
    TooFewArms(usize),
    #[error("arm mean {value} at position {index} is outside [0, 1]")]
    MeanOutOfRange { index: usize, value: f64 },
    #[error("player count {players} must satisfy 1 <= M < K = {arms}")]
    BadPlayerCount { players: usize, arms: usize },
    #[error("expected {expected} choices, got {got}")]
    WrongChoiceCount { expected: usize, got: usize },
    #[error("arm {arm} is out of range for K = {arms}")]
    ArmOutOfRange { arm: usize, arms: usize },
}

/// Arm identifier, zero-based internally and one-based when displayed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Arm(usize);

impl Arm {
    pub const fn new(index: usize) -> Self {
        Arm(index)
    }

    /// Builds an arm from the `1..=K` numbering used at the interface.
    pub fn from_one_based(number: usize) -> Option<Self> {
        number.checked_sub(1).map(Arm)
    }

    pub const fn index(self) -> usize {
        self.0
    }

    pub const fn number(self) -> usize {
        self.0 + 1
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Validated arm means, one per arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmMeans {
    means: Vec<f64>,
}

impl ArmMeans {
    pub fn new(means: Vec<f64>) -> Result<Self, EnvError> {
        if means.len() < 2 {
            return Err(EnvError::TooFewArms(means.len()));
        }
        if let Some((index, &value)) = means
            .iter()
            .enumerate()
            .find(|(_, m)| !(0.0..=1.0).contains(*m))
        {
            return Err(EnvError::MeanOutOfRange { index, value });
        }
        Ok(ArmMeans { means })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.means
    }

    pub fn mean(&self, arm: Arm) -> f64 {
        self.means[arm.index()]
    }

    /// Means in descending order, i.e. the order statistics µ_(1) ≥ … ≥ µ_(K).
    pub fn sorted_desc(&self) -> Vec<f64> {
        let mut sorted = self.means.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        sorted
    }

    /// Arms ordered from best to worst; ties broken by lower index.
    pub fn ranking(&self) -> Vec<Arm> {
        let mut arms: Vec<Arm> = (0..self.means.len()).map(Arm).collect();
        arms.sort_by(|a, b| self.means[b.0].total_cmp(&self.means[a.0]).then(a.cmp(b)));
        arms
    }

    /// True when `arm` has a mean at least as large as the M-th best mean.
    pub fn is_top(&self, arm: Arm, players: usize) -> bool {
        if players == 0 {
            return false;
        }
        let sorted = self.sorted_desc();
        self.means[arm.index()] >= sorted[players.min(sorted.len()) - 1]
    }
}

/// True iff at least two of `choices` equal `arm`.
pub fn collision_indicator(choices: &[Arm], arm: Arm) -> bool {
    choices.iter().filter(|&&c| c == arm).count() >= 2
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("cannot take the {players} best of {arms} arms")]
pub struct TopSumError {
    pub players: usize,
    pub arms: usize,
}

/// Sum of the `players` largest means, summed from the largest down.
pub fn top_m_sum(means: &ArmMeans, players: usize) -> Result<f64, TopSumError> {
    if players > means.len() {
        return Err(TopSumError {
            players,
            arms: means.len(),
        });
    }
    Ok(means.sorted_desc().iter().take(players).sum())
}

/// Expected per-pull reward of arm `arm` when every player picks arms
/// uniformly at random: (1 − 1/K)^(M−1) · µ_k.
pub fn expected_uniform_reward(means: &ArmMeans, players: usize, arm: Arm) -> f64 {
    let k = means.len() as f64;
    let exponent = players.saturating_sub(1) as i32;
    (1.0 - 1.0 / k).powi(exponent) * means.mean(arm)
}

/// Rewards handed back to the players after one slot. Collision indicators
/// and other players' choices never leave the environment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub rewards: Vec<Reward>,
}

/// Cumulative pseudo-regret with optional checkpoints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegretLedger {
    cumulative: f64,
    checkpoints: Vec<(u64, f64)>,
}

impl RegretLedger {
    pub fn cumulative(&self) -> f64 {
        self.cumulative
    }

    pub fn checkpoints(&self) -> &[(u64, f64)] {
        &self.checkpoints
    }

    fn add(&mut self, increment: f64) {
        debug_assert!(increment >= 0.0);
        self.cumulative += increment;
    }

    fn checkpoint(&mut self, slot: u64) {
        self.checkpoints.push((slot, self.cumulative));
    }
}

#[derive(Debug, Clone)]
pub struct Environment {
    arms: ArmMeans,
    players: usize,
    slot: u64,
    seed: u64,
    best_sum: f64,
    ledger: RegretLedger,
    // scratch buffers reused across slots
    pulls: Vec<u32>,
    collected: Vec<f64>,
}

impl Environment {
    pub fn new(arms: ArmMeans, players: usize, seed: u64) -> Result<Self, EnvError> {
        if players == 0 || players >= arms.len() {
            return Err(EnvError::BadPlayerCount {
                players,
                arms: arms.len(),
            });
        }
        let best_sum = top_m_sum(&arms, players).expect("M < K checked above");
        let k = arms.len();
        Ok(Environment {
            arms,
            players,
            slot: 0,
            seed,
            best_sum,
            ledger: RegretLedger::default(),
            pulls: vec![0; k],
            collected: Vec::with_capacity(players),
        })
    }

    pub fn arms(&self) -> &ArmMeans {
        &self.arms
    }

    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn num_players(&self) -> usize {
        self.players
    }

    /// Number of slots already played.
    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn ledger(&self) -> &RegretLedger {
        &self.ledger
    }

    /// Stores the current cumulative regret under the current slot count.
    pub fn checkpoint(&mut self) {
        self.ledger.checkpoint(self.slot);
    }

    /// Plays one slot and returns each player's reward.
    pub fn step(&mut self, choices: &[Arm]) -> Result<Observation, EnvError> {
        let mut rewards = vec![0; choices.len()];
        self.step_into(choices, &mut rewards)?;
        Ok(Observation { rewards })
    }

    /// Allocation-free variant of [`Environment::step`].
    pub fn step_into(&mut self, choices: &[Arm], rewards: &mut [Reward]) -> Result<(), EnvError> {
        if choices.len() != self.players || rewards.len() != self.players {
            return Err(EnvError::WrongChoiceCount {
                expected: self.players,
                got: choices.len(),
            });
        }
        let k = self.arms.len();
        if let Some(bad) = choices.iter().find(|a| a.index() >= k) {
            return Err(EnvError::ArmOutOfRange {
                arm: bad.number(),
                arms: k,
            });
        }

        for &arm in choices {
            self.pulls[arm.index()] += 1;
        }
        self.collected.clear();
        for (reward, &arm) in rewards.iter_mut().zip(choices) {
            if self.pulls[arm.index()] >= 2 {
                *reward = 0;
            } else {
                let mean = self.arms.mean(arm);
                self.collected.push(mean);
                *reward = self.draw(arm) as Reward;
            }
        }
        for &arm in choices {
            self.pulls[arm.index()] = 0;
        }

        // Summing in descending order makes the increment exactly zero when
        // the collected set is a top-M set.
        self.collected.sort_by(|a, b| b.total_cmp(a));
        let gathered: f64 = self.collected.iter().sum();
        self.ledger.add((self.best_sum - gathered).max(0.0));
        self.slot += 1;
        Ok(())
    }

    /// The Bernoulli draw X_k(t) for the current slot. One draw exists per
    /// (arm, slot) pair and it is a pure function of (seed, slot, arm).
    fn draw(&self, arm: Arm) -> bool {
        keyed_uniform(self.seed, self.slot, arm.index() as u64) < self.arms.mean(arm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arms(v: &[f64]) -> ArmMeans {
        ArmMeans::new(v.to_vec()).unwrap()
    }

    fn a(n: usize) -> Arm {
        Arm::from_one_based(n).unwrap()
    }

    #[test]
    fn constructor_accepts_two_arms_one_player() {
        let env = Environment::new(arms(&[0.9, 0.1]), 1, 7).unwrap();
        assert_eq!(env.num_arms(), 2);
        assert_eq!(env.slot(), 0);
        assert_eq!(env.ledger().cumulative(), 0.0);
        assert!(env.ledger().checkpoints().is_empty());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(ArmMeans::new(vec![0.5]), Err(EnvError::TooFewArms(1)));
        assert!(matches!(
            ArmMeans::new(vec![0.5, 1.2]),
            Err(EnvError::MeanOutOfRange { index: 1, .. })
        ));
        assert!(ArmMeans::new(vec![f64::NAN, 0.1]).is_err());
        assert!(Environment::new(arms(&[0.5, 0.5]), 2, 0).is_err());
        assert!(Environment::new(arms(&[0.5, 0.5]), 0, 0).is_err());
        let mut env = Environment::new(arms(&[0.5, 0.5, 0.2]), 2, 0).unwrap();
        assert_eq!(
            env.step(&[a(1), a(4)]),
            Err(EnvError::ArmOutOfRange { arm: 4, arms: 3 })
        );
        assert!(env.step(&[a(1)]).is_err());
        assert_eq!(env.slot(), 0);
    }

    #[test]
    fn boundary_means_are_legal() {
        assert!(ArmMeans::new(vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn collision_zeroes_and_deterministic_arm_pays() {
        let mut env = Environment::new(arms(&[0.4, 0.4, 1.0]), 2, 3).unwrap();
        // K = 3 admits at most two players; reuse the three-choice example with M = 2
        let obs = env.step(&[a(1), a(1)]).unwrap();
        assert_eq!(obs.rewards, vec![0, 0]);

        let mut env = Environment::new(arms(&[0.4, 0.4, 1.0, 0.0]), 3, 3).unwrap();
        for _ in 0..50 {
            let obs = env.step(&[a(1), a(1), a(3)]).unwrap();
            assert_eq!(obs.rewards, vec![0, 0, 1]);
        }
    }

    #[test]
    fn oracle_play_has_zero_increment() {
        let mut env = Environment::new(arms(&[1.0, 1.0, 1.0, 0.3]), 3, 11).unwrap();
        for _ in 0..10 {
            let obs = env.step(&[a(3), a(1), a(2)]).unwrap();
            assert_eq!(obs.rewards, vec![1, 1, 1]);
        }
        assert_eq!(env.ledger().cumulative(), 0.0);
    }

    #[test]
    fn zero_increment_with_awkward_float_means() {
        let means = arms(&[0.1, 0.7, 0.2, 0.30000000000000004, 0.6]);
        let mut env = Environment::new(means, 4, 5).unwrap();
        for _ in 0..100 {
            env.step(&[a(3), a(4), a(2), a(5)]).unwrap();
            env.step(&[a(5), a(2), a(4), a(3)]).unwrap();
        }
        assert_eq!(env.ledger().cumulative(), 0.0);
    }

    #[test]
    fn regret_increment_matches_definition() {
        let mut env = Environment::new(arms(&[0.9, 0.5, 0.1]), 2, 1).unwrap();
        env.step(&[a(3), a(3)]).unwrap();
        assert!((env.ledger().cumulative() - 1.4).abs() < 1e-12);
        env.step(&[a(1), a(3)]).unwrap();
        assert!((env.ledger().cumulative() - 1.8).abs() < 1e-12);
    }

    #[test]
    fn equal_seeds_give_identical_streams() {
        let means = arms(&[0.3, 0.6, 0.5]);
        let mut e1 = Environment::new(means.clone(), 2, 42).unwrap();
        let mut e2 = Environment::new(means.clone(), 2, 42).unwrap();
        let mut e3 = Environment::new(means, 2, 43).unwrap();
        let mut same = true;
        for t in 0..500 {
            let choices = [Arm::new(t % 3), Arm::new((t / 3) % 3)];
            let o1 = e1.step(&choices).unwrap();
            let o2 = e2.step(&choices).unwrap();
            let o3 = e3.step(&choices).unwrap();
            assert_eq!(o1, o2);
            same &= o1 == o3;
        }
        assert_eq!(e1.ledger(), e2.ledger());
        assert!(!same);
    }

    #[test]
    fn shared_draw_between_single_occupants() {
        // The slot's draw for an arm doesn't depend on who pulled it.
        let means = arms(&[0.5, 0.5, 0.5]);
        let mut e1 = Environment::new(means.clone(), 2, 9).unwrap();
        let mut e2 = Environment::new(means, 2, 9).unwrap();
        for _ in 0..200 {
            let o1 = e1.step(&[Arm::new(0), Arm::new(1)]).unwrap();
            let o2 = e2.step(&[Arm::new(1), Arm::new(0)]).unwrap();
            assert_eq!(o1.rewards[0], o2.rewards[1]);
            assert_eq!(o1.rewards[1], o2.rewards[0]);
        }
    }

    #[test]
    fn empirical_mean_inside_hoeffding_band() {
        let mut env = Environment::new(arms(&[0.6, 0.2]), 1, 17).unwrap();
        let n = 100_000;
        let mut total = 0u64;
        for _ in 0..n {
            total += env.step(&[a(1)]).unwrap().rewards[0] as u64;
        }
        let mean = total as f64 / n as f64;
        // 3-sigma for a [0,1] variable: 3 · (1/2) / sqrt(n)
        let band = 3.0 * 0.5 / (n as f64).sqrt();
        assert!((mean - 0.6).abs() <= band, "mean {mean}");
    }

    #[test]
    fn collision_indicator_cases() {
        assert!(collision_indicator(&[a(1), a(1), a(3)], a(1)));
        assert!(!collision_indicator(&[a(1), a(2), a(3)], a(2)));
        assert!(collision_indicator(&[a(2), a(2), a(2)], a(2)));
    }

    #[test]
    fn top_m_sum_cases() {
        assert!((top_m_sum(&arms(&[0.9, 0.5, 0.1]), 2).unwrap() - 1.4).abs() < 1e-12);
        assert!((top_m_sum(&arms(&[0.3, 0.3, 0.3]), 3).unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(top_m_sum(&arms(&[0.3, 0.8]), 0).unwrap(), 0.0);
        assert!(top_m_sum(&arms(&[0.3, 0.8]), 3).is_err());
    }

    #[test]
    fn expected_uniform_reward_cases() {
        assert!((expected_uniform_reward(&arms(&[0.8, 0.1]), 2, a(1)) - 0.4).abs() < 1e-15);
        assert_eq!(expected_uniform_reward(&arms(&[0.8, 0.37]), 1, a(2)), 0.37);
        let ten = ArmMeans::new(vec![1.0; 10]).unwrap();
        assert!((expected_uniform_reward(&ten, 5, a(1)) - 0.6561).abs() < 1e-12);
    }

    #[test]
    fn ranking_and_top_membership() {
        let m = arms(&[0.2, 0.9, 0.5, 0.9]);
        assert_eq!(m.ranking(), vec![a(2), a(4), a(3), a(1)]);
        assert!(m.is_top(a(3), 3));
        assert!(!m.is_top(a(3), 2));
        assert_eq!(a(2).to_string(), "2");
    }
}
