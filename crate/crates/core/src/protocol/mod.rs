//! The four-stage decentralized protocol, one state machine per player.
//!
//! Every player runs the same pipeline on its own observations:
//!
//! 1. find a good arm all players agree on, with a lower bound µ̃ on its mean;
//! 2. musical chairs on K virtual copies of that arm, giving an external rank;
//! 3. sequential hopping on the virtual copies, giving the player count and
//!    an internal rank;
//! 4. distributed exploration coordinated by the rank-1 player, ending with
//!    one of the M best arms assigned to every player;
//!
//! and then pulls its assigned arm until the horizon. Only the good arm is
//! used for coordination, so arms with tiny means never slow it down.

mod count_players;
mod exploration;
mod find_good_arm;
mod musical_chairs;

pub use count_players::PlayerCount;
pub use exploration::{
    accept_reject, assigned_arm, confidence_radius, ArmStat, ExplorationFault, LeaderBook,
    NoSamples,
};
pub use find_good_arm::{accepts, GoodArm};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::env::{Arm, Reward};
use crate::policy::Policy;
use count_players::CountPlayers;
use exploration::{Exploration, ExploreEvent};
use find_good_arm::FindGoodArm;
use musical_chairs::MusicalChairs;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("the protocol needs at least two arms, got {0}")]
    TooFewArms(usize),
    #[error("confidence parameter must lie in (0, 1), got {0}")]
    BadDelta(f64),
}

fn ceil_slots(x: f64) -> u64 {
    // saturating float-to-int cast
    x.ceil() as u64
}

/// Shared constants every player knows: K and δ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    arms: usize,
    delta: f64,
}

impl ProtocolParams {
    pub fn new(arms: usize, delta: f64) -> Result<Self, ParamsError> {
        if arms < 2 {
            return Err(ParamsError::TooFewArms(arms));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(ParamsError::BadDelta(delta));
        }
        Ok(ProtocolParams { arms, delta })
    }

    /// Parameters for a run of `horizon` slots, δ = 1/(T·ln T).
    pub fn for_horizon(arms: usize, horizon: u64) -> Result<Self, ParamsError> {
        Self::new(arms, horizon_delta(horizon))
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    fn ln_inv_delta(&self) -> f64 {
        (1.0 / self.delta).ln()
    }

    fn ln_two_over_delta(&self) -> f64 {
        (2.0 / self.delta).ln()
    }

    /// ⌈6K·2^p·ln(2/δ)⌉ uniform samples in phase p of the good-arm search.
    pub fn good_arm_sample_slots(&self, phase: u32) -> u64 {
        ceil_slots(6.0 * self.arms as f64 * (phase as f64).exp2() * self.ln_two_over_delta())
    }

    /// ⌈K·2^p·ln(2/δ)⌉ slots per confirmation window in phase p.
    pub fn good_arm_confirm_slots(&self, phase: u32) -> u64 {
        ceil_slots(self.arms as f64 * (phase as f64).exp2() * self.ln_two_over_delta())
    }

    /// Blocks of musical chairs, ⌈K·ln(1/δ)/µ̃⌉.
    pub fn chairs_tau(&self, lower_bound: f64) -> u64 {
        ceil_slots(self.arms as f64 * self.ln_inv_delta() / lower_bound)
    }

    /// Slots per bit or per counting window, ⌈ln(1/δ)/µ̃⌉.
    pub fn signal_tau(&self, lower_bound: f64) -> u64 {
        ceil_slots(self.ln_inv_delta() / lower_bound)
    }

    /// Pulls of every active arm by every explorer in phase p, 2^p·⌈ln(1/δ)⌉.
    pub fn pulls_per_arm(&self, phase: u32) -> u64 {
        let base = self.ln_inv_delta().ceil() as u64;
        base.saturating_mul(1u64.checked_shl(phase).unwrap_or(u64::MAX))
    }

    /// Bits per uploaded estimate in phase p, ⌈p/2 + 3⌉.
    pub fn message_bits(&self, phase: u32) -> usize {
        (phase as usize).div_ceil(2) + 3
    }
}

/// δ = 1/(T·ln T), clamped into (0, 1/2] for horizons too short for the
/// formula to make sense.
pub fn horizon_delta(horizon: u64) -> f64 {
    let t = horizon as f64;
    let d = 1.0 / (t * t.ln());
    if d.is_finite() && d > 0.0 && d <= 0.5 {
        d
    } else {
        0.5
    }
}

/// Smallest-index arm other than `good`.
fn default_park(good: Arm) -> Arm {
    if good.index() == 0 {
        Arm::new(1)
    } else {
        Arm::new(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StageKind {
    FindGoodArm,
    MusicalChairs,
    CountPlayers,
    Explore,
    Exploit,
    Aborted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Musical chairs ended without a seat.
    Unseated,
    Exploration(ExplorationFault),
}

/// What each stage produced, and when. Slot counts are the number of slots
/// the player had completed when the stage ended.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScheduleOutcome {
    pub good_arm: Option<GoodArm>,
    pub good_arm_phase: Option<u32>,
    pub good_arm_exit: Option<u64>,
    /// One-based external rank.
    pub external_rank: Option<usize>,
    pub chairs_exit: Option<u64>,
    pub player_count: Option<PlayerCount>,
    pub count_exit: Option<u64>,
    pub assigned: Option<Arm>,
    pub assigned_at: Option<u64>,
    pub exploration_phases: u32,
    /// Bits exchanged in each exploration phase, as seen by the leader.
    pub bits_per_phase: Vec<u64>,
    pub fault: Option<Fault>,
}

#[derive(Debug, Clone)]
enum Stage {
    FindGoodArm(FindGoodArm),
    MusicalChairs(MusicalChairs),
    CountPlayers(CountPlayers),
    Explore(Box<Exploration>),
    Exploit(Arm),
    Aborted(Arm),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum DeltaRule {
    Horizon,
    Fixed(f64),
}

/// One player running the full protocol.
#[derive(Debug, Clone)]
pub struct ProposedPlayer {
    rule: DeltaRule,
    params: ProtocolParams,
    rng: ChaCha8Rng,
    stage: Stage,
    elapsed: u64,
    outcome: ScheduleOutcome,
}

impl Default for ProposedPlayer {
    fn default() -> Self {
        Self::new()
    }
}

impl ProposedPlayer {
    /// δ is derived from the horizon at every reset.
    pub fn new() -> Self {
        Self::build(DeltaRule::Horizon)
    }

    /// Uses a fixed δ regardless of the horizon.
    pub fn with_delta(delta: f64) -> Result<Self, ParamsError> {
        ProtocolParams::new(2, delta)?;
        Ok(Self::build(DeltaRule::Fixed(delta)))
    }

    fn build(rule: DeltaRule) -> Self {
        let params = ProtocolParams::new(2, 0.5).expect("valid placeholder");
        ProposedPlayer {
            rule,
            params,
            rng: ChaCha8Rng::seed_from_u64(0),
            stage: Stage::FindGoodArm(FindGoodArm::new(params)),
            elapsed: 0,
            outcome: ScheduleOutcome::default(),
        }
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn stage(&self) -> StageKind {
        match self.stage {
            Stage::FindGoodArm(_) => StageKind::FindGoodArm,
            Stage::MusicalChairs(_) => StageKind::MusicalChairs,
            Stage::CountPlayers(_) => StageKind::CountPlayers,
            Stage::Explore(_) => StageKind::Explore,
            Stage::Exploit(_) => StageKind::Exploit,
            Stage::Aborted(_) => StageKind::Aborted,
        }
    }

    /// Current phase of the good-arm search or of exploration.
    pub fn phase(&self) -> Option<u32> {
        match &self.stage {
            Stage::FindGoodArm(s) => Some(s.phase()),
            Stage::Explore(e) => Some(e.phase()),
            _ => None,
        }
    }

    pub fn outcome(&self) -> &ScheduleOutcome {
        &self.outcome
    }

    fn abort(&mut self, fault: Fault, fallback: Arm) {
        self.outcome.fault = Some(fault);
        self.stage = Stage::Aborted(fallback);
    }

    fn commit(&mut self, arm: Arm) {
        self.outcome.assigned = Some(arm);
        self.outcome.assigned_at = Some(self.elapsed);
        self.stage = Stage::Exploit(arm);
    }
}

impl Policy for ProposedPlayer {
    fn reset(&mut self, seed: u64, arms: usize, horizon: u64) {
        let delta = match self.rule {
            DeltaRule::Horizon => horizon_delta(horizon),
            DeltaRule::Fixed(d) => d,
        };
        self.params = ProtocolParams::new(arms, delta).expect("arms >= 2 and delta checked");
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.stage = Stage::FindGoodArm(FindGoodArm::new(self.params));
        self.elapsed = 0;
        self.outcome = ScheduleOutcome::default();
    }

    fn act(&mut self, _slot: u64) -> Arm {
        match &mut self.stage {
            Stage::FindGoodArm(s) => s.choose(&mut self.rng),
            Stage::MusicalChairs(s) => s.choose(&mut self.rng),
            Stage::CountPlayers(s) => s.choose(),
            Stage::Explore(s) => s.choose(),
            Stage::Exploit(arm) | Stage::Aborted(arm) => *arm,
        }
    }

    fn observe(&mut self, reward: Reward) {
        self.elapsed += 1;
        let k = self.params.arms();
        match &mut self.stage {
            Stage::FindGoodArm(s) => {
                let phase = s.phase();
                if let Some(good) = s.observe(reward) {
                    self.outcome.good_arm = Some(good);
                    self.outcome.good_arm_phase = Some(phase);
                    self.outcome.good_arm_exit = Some(self.elapsed);
                    let blocks = self.params.chairs_tau(good.lower_bound);
                    self.stage = Stage::MusicalChairs(MusicalChairs::new(
                        k,
                        good.arm,
                        default_park(good.arm),
                        blocks,
                    ));
                }
            }
            Stage::MusicalChairs(s) => {
                if let Some(seat) = s.observe(reward) {
                    self.outcome.chairs_exit = Some(self.elapsed);
                    let good = self.outcome.good_arm.expect("set before musical chairs");
                    let park = default_park(good.arm);
                    match seat {
                        Some(rank) => {
                            self.outcome.external_rank = Some(rank + 1);
                            let tau = self.params.signal_tau(good.lower_bound);
                            self.stage = Stage::CountPlayers(CountPlayers::new(
                                k, good.arm, park, rank, tau,
                            ));
                        }
                        None => self.abort(Fault::Unseated, park),
                    }
                }
            }
            Stage::CountPlayers(s) => {
                if let Some(count) = s.observe(reward) {
                    self.outcome.player_count = Some(count);
                    self.outcome.count_exit = Some(self.elapsed);
                    let good = self.outcome.good_arm.expect("set before counting");
                    let park = default_park(good.arm);
                    let tau = self.params.signal_tau(good.lower_bound);
                    match Exploration::new(self.params, good.arm, park, tau, count) {
                        Ok(e) => self.stage = Stage::Explore(Box::new(e)),
                        Err(f) => self.abort(Fault::Exploration(f), park),
                    }
                }
            }
            Stage::Explore(e) => {
                if let Some(event) = e.observe(reward) {
                    self.outcome.exploration_phases = e.phase();
                    self.outcome.bits_per_phase = e.bits_per_phase().to_vec();
                    match event {
                        ExploreEvent::Finished(arm) => self.commit(arm),
                        ExploreEvent::Fault(f) => {
                            let park = default_park(self.outcome.good_arm.expect("set").arm);
                            self.abort(Fault::Exploration(f), park);
                        }
                    }
                }
            }
            Stage::Exploit(_) | Stage::Aborted(_) => {}
        }
    }

    fn assignment(&self) -> Option<Arm> {
        match &self.stage {
            Stage::Exploit(arm) => Some(*arm),
            _ => None,
        }
    }

    fn aborted(&self) -> bool {
        self.outcome.fault.is_some()
    }
}
