//! Rank assignment by musical chairs on K virtual arms.
//!
//! Time is cut into blocks of K slots and offset ℓ of every block stands for
//! virtual arm ℓ. Only the good arm is ever pulled for real. An unseated
//! player draws a fresh offset at each block start and pulls the good arm at
//! that offset; the first nonzero reward seats it there for good. A seated
//! player keeps pulling at its offset so later arrivals collide with it.

use rand::Rng;

use crate::env::{Arm, Reward};

#[derive(Debug, Clone)]
pub(crate) struct MusicalChairs {
    arms: usize,
    good: Arm,
    park: Arm,
    total: u64,
    elapsed: u64,
    seat: Option<usize>,
    target: usize,
}

impl MusicalChairs {
    /// Runs for exactly `arms · blocks` slots.
    pub(crate) fn new(arms: usize, good: Arm, park: Arm, blocks: u64) -> Self {
        MusicalChairs {
            arms,
            good,
            park,
            total: arms as u64 * blocks,
            elapsed: 0,
            seat: None,
            target: 0,
        }
    }

    fn offset(&self) -> usize {
        (self.elapsed % self.arms as u64) as usize
    }

    pub(crate) fn choose(&mut self, rng: &mut impl Rng) -> Arm {
        if self.offset() == 0 {
            self.target = match self.seat {
                Some(s) => s,
                None => rng.random_range(0..self.arms),
            };
        }
        if self.offset() == self.target {
            self.good
        } else {
            self.park
        }
    }

    /// Returns the final seat (external rank, zero-based) once the
    /// subroutine's time is up; `Some(None)` means the player never sat.
    pub(crate) fn observe(&mut self, reward: Reward) -> Option<Option<usize>> {
        if self.offset() == self.target && reward > 0 && self.seat.is_none() {
            self.seat = Some(self.target);
        }
        self.elapsed += 1;
        (self.elapsed == self.total).then_some(self.seat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{ArmMeans, Environment};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_player_sits_on_first_draw() {
        let means = ArmMeans::new(vec![1.0, 0.2, 0.3, 0.1, 0.5]).unwrap();
        for seed in 0..20 {
            let mut env = Environment::new(means.clone(), 1, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut mc = MusicalChairs::new(5, Arm::new(0), Arm::new(1), 10);
            let mut first_target = None;
            let mut result = None;
            while result.is_none() {
                let arm = mc.choose(&mut rng);
                first_target.get_or_insert(mc.target);
                let r = env.step(&[arm]).unwrap().rewards[0];
                result = mc.observe(r);
            }
            assert_eq!(env.slot(), 50);
            assert_eq!(result.unwrap(), first_target);
        }
    }

    #[test]
    fn duration_ignores_rewards() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut mc = MusicalChairs::new(5, Arm::new(2), Arm::new(0), 10);
        let mut slots = 0;
        loop {
            mc.choose(&mut rng);
            slots += 1;
            if mc.observe(0).is_some() {
                break;
            }
        }
        assert_eq!(slots, 50);
    }
}
