//! The per-player policy interface and the two reference baselines.
//!
//! A policy only ever sees its own rewards. It has no handle on the
//! environment or on other players, which keeps every implementation
//! decentralized by construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{Arm, Reward};

pub trait Policy: Send {
    /// Prepares for a fresh run over `arms` arms and `horizon` slots.
    fn reset(&mut self, seed: u64, arms: usize, horizon: u64);

    /// Arm to pull at `slot` (zero-based).
    fn act(&mut self, slot: u64) -> Arm;

    /// Reward for the arm returned by the last call to [`Policy::act`].
    fn observe(&mut self, reward: Reward);

    /// Arm the policy has committed to, if any.
    fn assignment(&self) -> Option<Arm> {
        None
    }

    /// True once the policy has hit an unrecoverable protocol error.
    fn aborted(&self) -> bool {
        false
    }
}

/// Picks an arm uniformly at random every slot.
#[derive(Debug, Clone)]
pub struct UniformPolicy {
    rng: ChaCha8Rng,
    arms: usize,
}

impl UniformPolicy {
    pub fn new() -> Self {
        UniformPolicy {
            rng: ChaCha8Rng::seed_from_u64(0),
            arms: 1,
        }
    }
}

impl Default for UniformPolicy {
    fn default() -> Self {
        Self::new()
    }
}

impl Policy for UniformPolicy {
    fn reset(&mut self, seed: u64, arms: usize, _horizon: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.arms = arms;
    }

    fn act(&mut self, _slot: u64) -> Arm {
        Arm::new(self.rng.random_range(0..self.arms))
    }

    fn observe(&mut self, _reward: Reward) {}
}

/// Always pulls the same arm. Pinning each player to a distinct top-M arm
/// gives the zero-regret oracle.
#[derive(Debug, Clone)]
pub struct PinnedPolicy {
    arm: Arm,
}

impl PinnedPolicy {
    pub fn new(arm: Arm) -> Self {
        PinnedPolicy { arm }
    }
}

impl Policy for PinnedPolicy {
    fn reset(&mut self, _seed: u64, _arms: usize, _horizon: u64) {}

    fn act(&mut self, _slot: u64) -> Arm {
        self.arm
    }

    fn observe(&mut self, _reward: Reward) {}

    fn assignment(&self) -> Option<Arm> {
        Some(self.arm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_covers_all_arms_and_replays() {
        let mut p = UniformPolicy::new();
        p.reset(5, 4, 100);
        let first: Vec<Arm> = (0..400).map(|t| p.act(t)).collect();
        for k in 0..4 {
            assert!(first.contains(&Arm::new(k)));
        }
        p.reset(5, 4, 100);
        let second: Vec<Arm> = (0..400).map(|t| p.act(t)).collect();
        assert_eq!(first, second);
    }

    #[test]
    fn pinned_never_moves() {
        let mut p = PinnedPolicy::new(Arm::new(2));
        p.reset(0, 5, 10);
        assert!((0..10).all(|t| p.act(t) == Arm::new(2)));
        assert_eq!(p.assignment(), Some(Arm::new(2)));
    }
}
