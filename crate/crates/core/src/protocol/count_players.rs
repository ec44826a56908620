//! Counting players and assigning internal ranks by sequential hopping over
//! the virtual arms.
//!
//! There are 2K rounds of K windows, τ slots per window. In round n a player
//! with external rank s sits on virtual arm ℓ, starting at ℓ = s and hopping
//! to ℓ + 1 (mod K) at the start of every round n > 2s. It pulls the good arm
//! during window ℓ and parks otherwise. A window with only zero rewards means
//! a collision: the estimate M̂ grows by one, and the internal rank grows too
//! when the player has not started hopping yet. Any two players collide in
//! exactly one round, while the higher-ranked one is still stationary.

use crate::env::{Arm, Reward};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlayerCount {
    /// Estimated number of players M̂.
    pub estimate: usize,
    /// Internal rank j in `1..=estimate`; 1 is the leader.
    pub internal_rank: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct CountPlayers {
    arms: usize,
    good: Arm,
    park: Arm,
    tau: u64,
    /// external rank, one-based
    rank: usize,
    round: usize,
    window: usize,
    slot_in_window: u64,
    position: usize,
    window_reward: u64,
    count: PlayerCount,
}

impl CountPlayers {
    /// `external_rank` is zero-based; runs for exactly 2K²τ slots.
    pub(crate) fn new(arms: usize, good: Arm, park: Arm, external_rank: usize, tau: u64) -> Self {
        CountPlayers {
            arms,
            good,
            park,
            tau,
            rank: external_rank + 1,
            round: 1,
            window: 0,
            slot_in_window: 0,
            position: external_rank,
            window_reward: 0,
            count: PlayerCount {
                estimate: 1,
                internal_rank: 1,
            },
        }
    }

    pub(crate) fn choose(&self) -> Arm {
        if self.window == self.position {
            self.good
        } else {
            self.park
        }
    }

    pub(crate) fn observe(&mut self, reward: Reward) -> Option<PlayerCount> {
        let own = self.window == self.position;
        if own {
            self.window_reward += reward as u64;
        }
        self.slot_in_window += 1;
        if self.slot_in_window < self.tau {
            return None;
        }
        self.slot_in_window = 0;
        if own {
            if self.window_reward == 0 {
                self.count.estimate += 1;
                if self.round <= 2 * self.rank {
                    self.count.internal_rank += 1;
                }
            }
            self.window_reward = 0;
        }
        self.window += 1;
        if self.window < self.arms {
            return None;
        }
        self.window = 0;
        self.round += 1;
        if self.round > 2 * self.arms {
            return Some(self.count);
        }
        if self.round > 2 * self.rank {
            self.position = (self.position + 1) % self.arms;
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{ArmMeans, Environment};

    /// Drives several counters against one environment where the good arm
    /// pays 1 every uncontested slot.
    fn run(arms: usize, ranks: &[usize], tau: u64) -> (Vec<PlayerCount>, u64) {
        let mut means = vec![0.5; arms];
        means[0] = 1.0;
        let mut env = Environment::new(ArmMeans::new(means).unwrap(), ranks.len(), 0).unwrap();
        let mut counters: Vec<CountPlayers> = ranks
            .iter()
            .map(|&s| CountPlayers::new(arms, Arm::new(0), Arm::new(1), s, tau))
            .collect();
        let mut done = vec![None; ranks.len()];
        while done.iter().any(Option::is_none) {
            let choices: Vec<Arm> = counters.iter().map(|c| c.choose()).collect();
            let obs = env.step(&choices).unwrap();
            for (i, c) in counters.iter_mut().enumerate() {
                if let Some(r) = c.observe(obs.rewards[i]) {
                    done[i] = Some(r);
                }
            }
        }
        (done.into_iter().map(Option::unwrap).collect(), env.slot())
    }

    #[test]
    fn lone_player_counts_itself() {
        let (res, slots) = run(4, &[2], 3);
        assert_eq!(
            res,
            vec![PlayerCount {
                estimate: 1,
                internal_rank: 1
            }]
        );
        assert_eq!(slots, 2 * 4 * 4 * 3);
    }

    #[test]
    fn every_distinct_rank_pattern_counts_exactly() {
        // all subsets of distinct external ranks for K = 5, up to 4 players
        let k = 5;
        for mask in 1u32..(1 << k) {
            let ranks: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
            if ranks.len() >= k {
                continue;
            }
            let (res, _) = run(k, &ranks, 1);
            let m = ranks.len();
            let mut internal: Vec<usize> = res.iter().map(|c| c.internal_rank).collect();
            assert!(res.iter().all(|c| c.estimate == m), "{ranks:?} -> {res:?}");
            // internal rank follows external rank order
            let sorted = internal.clone();
            internal.sort_unstable();
            assert_eq!(internal, (1..=m).collect::<Vec<_>>());
            assert!(sorted.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
