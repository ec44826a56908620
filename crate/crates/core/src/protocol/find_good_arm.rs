//! Agreement on a good arm.
//!
//! Each phase p first samples arms uniformly at random and accepts arm k when
//! its empirical mean reaches 2^(1−p). It then walks the arms in ascending
//! order, one window each: an accepted arm is sampled uniformly and confirmed
//! by any nonzero reward from it, a rejected arm is pulled every slot, which
//! jams it for everyone else. The first confirmed arm ends the search with
//! lower bound 2^(−p), at the end of its window.

use rand::Rng;

use super::ProtocolParams;
use crate::env::{Arm, Reward};

/// Outcome of the search: the agreed arm and a lower bound on its mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodArm {
    pub arm: Arm,
    pub lower_bound: f64,
}

/// Acceptance test of the sampling sub-phase: `rewards / pulls ≥ 2^(1−phase)`.
/// An arm never sampled is rejected.
pub fn accepts(rewards: u64, pulls: u64, phase: u32) -> bool {
    if pulls == 0 {
        return false;
    }
    // scaling by a power of two is exact
    rewards as f64 >= pulls as f64 * (1.0 - phase as f64).exp2()
}

#[derive(Debug, Clone)]
enum SubPhase {
    Sample {
        left: u64,
    },
    Confirm {
        window: usize,
        left: u64,
        confirmed: bool,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct FindGoodArm {
    params: ProtocolParams,
    phase: u32,
    rewards: Vec<u64>,
    pulls: Vec<u64>,
    accepted: Vec<bool>,
    sub: SubPhase,
    last: Arm,
}

impl FindGoodArm {
    pub(crate) fn new(params: ProtocolParams) -> Self {
        let k = params.arms();
        let mut s = FindGoodArm {
            params,
            phase: 0,
            rewards: vec![0; k],
            pulls: vec![0; k],
            accepted: vec![false; k],
            sub: SubPhase::Sample { left: 0 },
            last: Arm::new(0),
        };
        s.start_phase();
        s
    }

    fn start_phase(&mut self) {
        self.phase += 1;
        self.rewards.iter_mut().for_each(|r| *r = 0);
        self.pulls.iter_mut().for_each(|n| *n = 0);
        self.sub = SubPhase::Sample {
            left: self.params.good_arm_sample_slots(self.phase),
        };
    }

    pub(crate) fn phase(&self) -> u32 {
        self.phase
    }

    pub(crate) fn choose(&mut self, rng: &mut impl Rng) -> Arm {
        let k = self.params.arms();
        self.last = match self.sub {
            SubPhase::Sample { .. } => Arm::new(rng.random_range(0..k)),
            SubPhase::Confirm { window, .. } => {
                if self.accepted[window] {
                    Arm::new(rng.random_range(0..k))
                } else {
                    Arm::new(window)
                }
            }
        };
        self.last
    }

    pub(crate) fn observe(&mut self, reward: Reward) -> Option<GoodArm> {
        let last = self.last;
        match &mut self.sub {
            SubPhase::Sample { left } => {
                self.rewards[last.index()] += reward as u64;
                self.pulls[last.index()] += 1;
                *left -= 1;
                if *left == 0 {
                    for k in 0..self.params.arms() {
                        self.accepted[k] = accepts(self.rewards[k], self.pulls[k], self.phase);
                    }
                    self.sub = SubPhase::Confirm {
                        window: 0,
                        left: self.params.good_arm_confirm_slots(self.phase),
                        confirmed: false,
                    };
                }
                None
            }
            SubPhase::Confirm {
                window,
                left,
                confirmed,
            } => {
                if self.accepted[*window] && last.index() == *window && reward > 0 {
                    *confirmed = true;
                }
                *left -= 1;
                if *left > 0 {
                    return None;
                }
                if *confirmed {
                    return Some(GoodArm {
                        arm: Arm::new(*window),
                        lower_bound: (-(self.phase as f64)).exp2(),
                    });
                }
                *window += 1;
                if *window == self.params.arms() {
                    self.start_phase();
                } else {
                    *left = self.params.good_arm_confirm_slots(self.phase);
                }
                None
            }
        }
    }
}
