//! Distributed exploration: collision-free successive elimination with a
//! leader.
//!
//! Every phase p the exploring players visit each active arm 2^p·⌈ln(1/δ)⌉
//! times by sequential hopping, offset by internal rank. Then the followers
//! upload their running estimates to the leader over the good arm, one
//! follower at a time, with ⌈p/2 + 3⌉ bits per estimate. The leader pools
//! them, decides which arms are surely in or surely out of the top set, and
//! sends the two lists back to each follower. Every player then applies the
//! same update, so the active set and active-player count stay in lockstep.
//!
//! Accepted arms other than the good arm go to followers from the highest
//! internal rank down. If the good arm is accepted it is reserved for the
//! leader, which from then on sits on it and keeps coordinating until every
//! follower has an arm.

use thiserror::Error;

use super::{count_players::PlayerCount, ProtocolParams};
use crate::env::{Arm, Reward};
use crate::signaling::{
    binary_to_float, binary_to_int, encode_schedule, float_to_binary, int_to_binary, int_width,
    BitMessage, CodecParams, Receiver,
};

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("confidence radius needs at least one sample")]
pub struct NoSamples;

/// B = sqrt(2·ln(1/δ)/t) + 2^(−p/2−3).
pub fn confidence_radius(pulls: u64, phase: u32, delta: f64) -> Result<f64, NoSamples> {
    if pulls == 0 {
        return Err(NoSamples);
    }
    let fluctuation = (2.0 * (1.0 / delta).ln() / pulls as f64).sqrt();
    let quantization = (-(phase as f64) / 2.0 - 3.0).exp2();
    Ok(fluctuation + quantization)
}

/// Pooled statistics of one active arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmStat {
    pub arm: Arm,
    pub mean: f64,
    pub radius: f64,
}

impl ArmStat {
    fn lower(&self) -> f64 {
        self.mean - self.radius
    }

    fn upper(&self) -> f64 {
        self.mean + self.radius
    }
}

/// Accept arm k when its lower bound clears the upper bound of at least
/// |𝒦| − seats arms; reject it when at least `seats` arms have a lower bound
/// above its upper bound. Both lists come back in ascending arm order.
pub fn accept_reject(stats: &[ArmStat], seats: usize) -> (Vec<Arm>, Vec<Arm>) {
    let n = stats.len();
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for s in stats {
        let beats = stats.iter().filter(|o| s.lower() >= o.upper()).count();
        let beaten_by = stats.iter().filter(|o| o.lower() >= s.upper()).count();
        if beats >= n.saturating_sub(seats) {
            accepted.push(s.arm);
        }
        if beaten_by >= seats {
            rejected.push(s.arm);
        }
    }
    accepted.sort_unstable();
    rejected.sort_unstable();
    (accepted, rejected)
}

/// Arm handed to the player of internal rank `rank` when `players` players
/// are active and `accepted` (good arm excluded, ascending) was just
/// accepted. Highest ranks are served first.
pub fn assigned_arm(rank: usize, players: usize, accepted: &[Arm]) -> Option<Arm> {
    if rank == 0 || rank > players {
        return None;
    }
    let index = players - rank;
    accepted.get(index).copied()
}

/// Per-player estimates and sample counts kept by the leader.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderBook {
    estimates: Vec<Vec<f64>>,
    counts: Vec<Vec<u64>>,
}

impl LeaderBook {
    pub fn new(players: usize, arms: usize) -> Self {
        LeaderBook {
            estimates: vec![vec![0.0; arms]; players],
            counts: vec![vec![0; arms]; players],
        }
    }

    /// Stores an estimate received from the player of internal rank `rank`
    /// and credits it with `added` more samples.
    pub fn record(&mut self, rank: usize, arm: Arm, estimate: f64, added: u64) {
        self.estimates[rank - 1][arm.index()] = estimate;
        self.counts[rank - 1][arm.index()] += added;
    }

    /// Overwrites the leader's own entry.
    pub fn set_own(&mut self, arm: Arm, estimate: f64, count: u64) {
        self.estimates[0][arm.index()] = estimate;
        self.counts[0][arm.index()] = count;
    }

    /// Count-weighted mean over players and total sample count.
    pub fn pooled(&self, arm: Arm) -> (f64, u64) {
        let k = arm.index();
        let total: u64 = self.counts.iter().map(|c| c[k]).sum();
        if total == 0 {
            return (0.0, 0);
        }
        let weighted: f64 = self
            .estimates
            .iter()
            .zip(&self.counts)
            .map(|(e, c)| e[k] * c[k] as f64)
            .sum();
        (weighted / total as f64, total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExplorationFault {
    /// A follower decoded list sizes or positions that cannot be right.
    CorruptBroadcast,
    /// Players remain but no arm is left to explore.
    NoActiveArms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ExploreEvent {
    Finished(Arm),
    Fault(ExplorationFault),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Explore,
    Upload(usize),
    Sizes(usize),
    Contents(usize),
}

#[derive(Debug, Clone)]
enum Activity {
    Hop {
        start: usize,
        elapsed: u64,
        total: u64,
    },
    Hold {
        arm: Arm,
        left: u64,
    },
    Send {
        schedule: Vec<Arm>,
        at: usize,
    },
    Listen(Receiver),
}

impl Activity {
    fn is_empty(&self) -> bool {
        match self {
            Activity::Hop { total, .. } => *total == 0,
            Activity::Hold { left, .. } => *left == 0,
            Activity::Send { schedule, .. } => schedule.is_empty(),
            Activity::Listen(r) => r.is_done(),
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Lists {
    accepted: Vec<Arm>,
    rejected: Vec<Arm>,
}

#[derive(Debug, Clone)]
pub(crate) struct Exploration {
    params: ProtocolParams,
    good: Arm,
    fallback_park: Arm,
    tau: u64,
    rank: usize,

    phase: u32,
    active: Vec<Arm>,
    players: usize,
    reserved: bool,

    rewards: Vec<u64>,
    pulls: Vec<u64>,

    book: Option<LeaderBook>,
    decision: Option<Lists>,
    sizes: Option<(usize, usize)>,
    lists: Option<Lists>,

    step: Step,
    activity: Activity,
    last: Arm,
    assigned: Option<Arm>,

    bits_this_phase: u64,
    bits_per_phase: Vec<u64>,
}

impl Exploration {
    pub(crate) fn new(
        params: ProtocolParams,
        good: Arm,
        fallback_park: Arm,
        tau: u64,
        count: PlayerCount,
    ) -> Result<Self, ExplorationFault> {
        let k = params.arms();
        let mut e = Exploration {
            params,
            good,
            fallback_park,
            tau,
            rank: count.internal_rank,
            phase: 0,
            active: (0..k).map(Arm::new).collect(),
            players: count.estimate,
            reserved: false,
            rewards: vec![0; k],
            pulls: vec![0; k],
            book: (count.internal_rank == 1).then(|| LeaderBook::new(count.estimate, k)),
            decision: None,
            sizes: None,
            lists: None,
            step: Step::Explore,
            activity: Activity::Hold { arm: good, left: 0 },
            last: good,
            assigned: None,
            bits_this_phase: 0,
            bits_per_phase: Vec::new(),
        };
        e.start_phase()?;
        Ok(e)
    }

    fn is_leader(&self) -> bool {
        self.rank == 1
    }

    /// Leader reserved on the good arm does not explore.
    fn explores(&self) -> bool {
        !(self.is_leader() && self.reserved)
    }

    fn seats(&self) -> usize {
        self.players - self.reserved as usize
    }

    pub(crate) fn phase(&self) -> u32 {
        self.phase
    }

    pub(crate) fn bits_per_phase(&self) -> &[u64] {
        &self.bits_per_phase
    }

    fn message_bits(&self) -> usize {
        self.params.message_bits(self.phase)
    }

    fn list_bits(&self) -> usize {
        int_width(self.active.len() as u64)
    }

    fn park(&self) -> Arm {
        let others: Vec<Arm> = self
            .active
            .iter()
            .copied()
            .filter(|&a| a != self.good)
            .collect();
        if others.is_empty() {
            self.fallback_park
        } else {
            others[self.rank % others.len()]
        }
    }

    fn codec(&self) -> CodecParams {
        CodecParams::over_active(self.good, self.tau as usize, &self.active)
            .or_else(|_| CodecParams::new(self.good, self.tau as usize, vec![self.fallback_park]))
            .expect("fallback park arm differs from the good arm")
    }

    fn send(&self, msg: &BitMessage) -> Activity {
        Activity::Send {
            schedule: encode_schedule(msg, &self.codec()),
            at: 0,
        }
    }

    fn listen(&self, bits: usize) -> Activity {
        Activity::Listen(Receiver::new(self.tau as usize, bits))
    }

    fn hold_bits(&self, bits: usize) -> Activity {
        Activity::Hold {
            arm: self.park(),
            left: bits as u64 * self.tau,
        }
    }

    fn start_phase(&mut self) -> Result<(), ExplorationFault> {
        if self.active.is_empty() {
            return Err(ExplorationFault::NoActiveArms);
        }
        self.phase += 1;
        self.bits_this_phase = 0;
        self.decision = None;
        self.sizes = None;
        self.lists = None;
        self.step = Step::Explore;
        let total = self.active.len() as u64 * self.params.pulls_per_arm(self.phase);
        self.activity = if self.explores() {
            Activity::Hop {
                start: self.rank,
                elapsed: 0,
                total,
            }
        } else {
            Activity::Hold {
                arm: self.good,
                left: total,
            }
        };
        Ok(())
    }

    pub(crate) fn choose(&mut self) -> Arm {
        self.last = match &self.activity {
            Activity::Hop { start, elapsed, .. } => {
                let n = self.active.len() as u64;
                self.active[((*start as u64 + elapsed + 1) % n) as usize]
            }
            Activity::Hold { arm, .. } => *arm,
            Activity::Send { schedule, at } => schedule[*at],
            Activity::Listen(_) => self.good,
        };
        self.last
    }

    pub(crate) fn observe(&mut self, reward: Reward) -> Option<ExploreEvent> {
        let finished = match &mut self.activity {
            Activity::Hop { elapsed, total, .. } => {
                self.rewards[self.last.index()] += reward as u64;
                self.pulls[self.last.index()] += 1;
                *elapsed += 1;
                *elapsed == *total
            }
            Activity::Hold { left, .. } => {
                *left -= 1;
                *left == 0
            }
            Activity::Send { schedule, at } => {
                *at += 1;
                *at == schedule.len()
            }
            Activity::Listen(receiver) => {
                receiver.push(reward);
                receiver.is_done()
            }
        };
        if !finished {
            return None;
        }
        let done = std::mem::replace(
            &mut self.activity,
            Activity::Hold {
                arm: self.good,
                left: 0,
            },
        );
        if let Activity::Listen(receiver) = done {
            if let Err(fault) = self.absorb(receiver.into_message()) {
                return Some(ExploreEvent::Fault(fault));
            }
        }
        self.advance()
    }

    /// Handles a message received during the step that just ended.
    fn absorb(&mut self, msg: BitMessage) -> Result<(), ExplorationFault> {
        match self.step {
            Step::Upload(sender) => {
                let q = self.message_bits();
                let added = self.params.pulls_per_arm(self.phase);
                self.bits_this_phase += msg.len() as u64;
                let book = self
                    .book
                    .as_mut()
                    .expect("only the leader listens to uploads");
                for (chunk, &arm) in msg.chunks(q).zip(&self.active) {
                    book.record(sender, arm, binary_to_float(&chunk), added);
                }
                Ok(())
            }
            Step::Sizes(_) => {
                let w = self.list_bits();
                let mut parts = msg.chunks(w).map(|c| binary_to_int(&c) as usize);
                let (acc, rej) = (parts.next().unwrap_or(0), parts.next().unwrap_or(0));
                if acc > self.seats() || acc + rej > self.active.len() {
                    return Err(ExplorationFault::CorruptBroadcast);
                }
                self.sizes = Some((acc, rej));
                if acc + rej == 0 {
                    self.lists = Some(Lists::default());
                }
                Ok(())
            }
            Step::Contents(_) => {
                let w = self.list_bits();
                let (acc, _) = self.sizes.expect("sizes precede contents");
                let mut positions: Vec<usize> =
                    msg.chunks(w).map(|c| binary_to_int(&c) as usize).collect();
                if positions.iter().any(|&p| p >= self.active.len()) {
                    return Err(ExplorationFault::CorruptBroadcast);
                }
                let rejected_pos = positions.split_off(acc);
                let to_arms =
                    |ps: &[usize]| -> Vec<Arm> { ps.iter().map(|&p| self.active[p]).collect() };
                let lists = Lists {
                    accepted: to_arms(&positions),
                    rejected: to_arms(&rejected_pos),
                };
                let mut all: Vec<Arm> = lists
                    .accepted
                    .iter()
                    .chain(&lists.rejected)
                    .copied()
                    .collect();
                all.sort_unstable();
                all.dedup();
                if all.len() != positions.len() + rejected_pos.len() {
                    return Err(ExplorationFault::CorruptBroadcast);
                }
                self.lists = Some(lists);
                Ok(())
            }
            Step::Explore => unreachable!("nothing is received while exploring"),
        }
    }

    fn next_step(&self, step: Step) -> Option<Step> {
        let last = self.players;
        match step {
            Step::Explore if last >= 2 => Some(Step::Upload(2)),
            Step::Upload(i) if i < last => Some(Step::Upload(i + 1)),
            Step::Explore | Step::Upload(_) if last >= 2 => Some(Step::Sizes(2)),
            Step::Sizes(i) if i < last => Some(Step::Sizes(i + 1)),
            Step::Sizes(_) => Some(Step::Contents(2)),
            Step::Contents(i) if i < last => Some(Step::Contents(i + 1)),
            _ => None,
        }
    }

    /// Moves to the next non-empty activity, applying the end-of-phase
    /// update when the communication round is over.
    fn advance(&mut self) -> Option<ExploreEvent> {
        loop {
            let next = self.next_step(self.step);
            if matches!(self.step, Step::Explore | Step::Upload(_))
                && !matches!(next, Some(Step::Upload(_)))
                && self.is_leader()
            {
                self.decide();
            }
            let Some(step) = next else {
                return self.apply();
            };
            self.step = step;
            self.activity = self.activity_for(step);
            if !self.activity.is_empty() {
                return None;
            }
        }
    }

    fn activity_for(&self, step: Step) -> Activity {
        match step {
            Step::Explore => unreachable!("exploration is started by start_phase"),
            Step::Upload(sender) => {
                let q = self.message_bits();
                let bits = self.active.len() * q;
                if self.rank == sender {
                    let msg = BitMessage::concat(self.active.iter().map(|&arm| {
                        float_to_binary(self.own_estimate(arm), q).expect("estimates lie in [0, 1]")
                    }));
                    self.send(&msg)
                } else if self.is_leader() {
                    self.listen(bits)
                } else {
                    self.hold_bits(bits)
                }
            }
            Step::Sizes(receiver) => {
                let w = self.list_bits();
                if self.is_leader() {
                    let d = self.decision.as_ref().expect("leader decided");
                    let msg = BitMessage::concat([
                        int_to_binary(d.accepted.len() as u64, w).expect("fits"),
                        int_to_binary(d.rejected.len() as u64, w).expect("fits"),
                    ]);
                    self.send(&msg)
                } else if self.rank == receiver {
                    self.listen(2 * w)
                } else {
                    self.hold_bits(2 * w)
                }
            }
            Step::Contents(receiver) => {
                let w = self.list_bits();
                if self.is_leader() {
                    let d = self.decision.as_ref().expect("leader decided");
                    let msg = BitMessage::concat(d.accepted.iter().chain(&d.rejected).map(|arm| {
                        let pos = self
                            .active
                            .binary_search(arm)
                            .expect("decided arms are active");
                        int_to_binary(pos as u64, w).expect("position fits")
                    }));
                    self.send(&msg)
                } else {
                    let (a, r) = self.sizes.unwrap_or((0, 0));
                    if self.rank == receiver {
                        self.listen((a + r) * w)
                    } else {
                        self.hold_bits((a + r) * w)
                    }
                }
            }
        }
    }

    fn own_estimate(&self, arm: Arm) -> f64 {
        let n = self.pulls[arm.index()];
        if n == 0 {
            0.0
        } else {
            self.rewards[arm.index()] as f64 / n as f64
        }
    }

    fn decide(&mut self) {
        let delta = self.params.delta();
        let phase = self.phase;
        let own: Vec<(Arm, f64, u64)> = self
            .active
            .iter()
            .map(|&a| (a, self.own_estimate(a), self.pulls[a.index()]))
            .collect();
        let book = self.book.as_mut().expect("leader keeps the book");
        for &(arm, est, n) in &own {
            book.set_own(arm, est, n);
        }
        let stats: Vec<ArmStat> = self
            .active
            .iter()
            .map(|&arm| {
                let (mean, total) = book.pooled(arm);
                let radius = confidence_radius(total, phase, delta).unwrap_or(f64::INFINITY);
                ArmStat { arm, mean, radius }
            })
            .collect();
        let (accepted, rejected) = accept_reject(&stats, self.seats());
        let followers = self.players.saturating_sub(1) as u64;
        let w = self.list_bits() as u64;
        self.bits_this_phase += followers * w * (2 + accepted.len() + rejected.len()) as u64;
        self.decision = Some(Lists { accepted, rejected });
    }

    fn apply(&mut self) -> Option<ExploreEvent> {
        let lists = if self.is_leader() {
            self.decision.take()
        } else {
            self.lists.take()
        }
        .unwrap_or_default();
        self.bits_per_phase.push(self.bits_this_phase);

        let good_accepted = lists.accepted.contains(&self.good);
        let others: Vec<Arm> = lists
            .accepted
            .iter()
            .copied()
            .filter(|&a| a != self.good)
            .collect();

        if self.is_leader() {
            if !self.reserved && good_accepted {
                self.assigned = Some(self.good);
            } else if !self.reserved {
                self.assigned = assigned_arm(1, self.players, &others);
            }
        } else if let Some(arm) = assigned_arm(self.rank, self.players, &others) {
            self.assigned = Some(arm);
            return Some(ExploreEvent::Finished(arm));
        }

        self.reserved |= good_accepted;
        self.players = self.players.saturating_sub(others.len());
        self.active
            .retain(|a| !lists.accepted.contains(a) && !lists.rejected.contains(a));

        if self.is_leader() {
            if let Some(arm) = self.assigned {
                if arm != self.good || self.players <= 1 {
                    return Some(ExploreEvent::Finished(arm));
                }
            }
        }
        match self.start_phase() {
            Ok(()) => None,
            Err(fault) => Some(ExploreEvent::Fault(fault)),
        }
    }
}
