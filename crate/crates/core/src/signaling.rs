//! Forced-collision signaling over the good arm.
//!
//! A receiver pulls the channel arm for τ slots per bit. The sender encodes a
//! 0 by pulling the channel arm too, which collides and zeroes every reward,
//! and a 1 by staying off it, so the receiver sees Bernoulli(µ) rewards and
//! reads a 1 as soon as any of them is nonzero. Errors are one-sided: a sent
//! 0 is always read as 0.
//!
//! Everything here is pure. The functions only build and parse pull
//! schedules; pulling is left to the protocol state machines.

use std::fmt;

use thiserror::Error;

use crate::env::{Arm, Reward};

/// Longest supported message.
pub const MAX_BITS: usize = 63;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("value {0} is outside [0, 1]")]
    ValueOutOfRange(f64),
    #[error("integer {value} does not fit in {bits} bits")]
    IntegerTooWide { value: u64, bits: usize },
    #[error("message size must be in 1..={MAX_BITS}, got {0}")]
    BadWidth(usize),
    #[error("slots per bit must be positive")]
    ZeroTau,
    #[error("no arm is available to park on while sending a 1")]
    EmptyParkSet,
    #[error("the channel arm {0} cannot also be a parking arm")]
    ChannelInParkSet(Arm),
    #[error("expected a multiple of {tau} rewards, got {got}")]
    RaggedWindow { tau: usize, got: usize },
}

/// A fixed-length big-endian bit string.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitMessage {
    bits: Vec<bool>,
}

impl BitMessage {
    pub fn new(bits: Vec<bool>) -> Self {
        BitMessage { bits }
    }

    pub fn from_digits(digits: &[u8]) -> Self {
        BitMessage {
            bits: digits.iter().map(|&d| d != 0).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn concat(parts: impl IntoIterator<Item = BitMessage>) -> Self {
        BitMessage {
            bits: parts.into_iter().flat_map(|m| m.bits).collect(),
        }
    }

    /// Splits into consecutive messages of `width` bits.
    pub fn chunks(&self, width: usize) -> impl Iterator<Item = BitMessage> + '_ {
        self.bits.chunks(width).map(|c| BitMessage::new(c.to_vec()))
    }
}

impl fmt::Display for BitMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

fn check_width(bits: usize) -> Result<(), CodecError> {
    if bits == 0 || bits > MAX_BITS {
        Err(CodecError::BadWidth(bits))
    } else {
        Ok(())
    }
}

/// Truncated binary expansion of `value` on `bits` digits, most significant
/// first. `1.0` saturates to all ones.
pub fn float_to_binary(value: f64, bits: usize) -> Result<BitMessage, CodecError> {
    check_width(bits)?;
    if !(0.0..=1.0).contains(&value) {
        return Err(CodecError::ValueOutOfRange(value));
    }
    let scale = (1u64 << bits) as f64;
    let top = (1u64 << bits) - 1;
    // power-of-two scaling is exact, so floor gives the exact truncation
    let n = ((value * scale).floor() as u64).min(top);
    int_to_binary(n, bits)
}

/// Σ_q bits[q] · 2^(−q), q counted from 1.
pub fn binary_to_float(msg: &BitMessage) -> f64 {
    let mut weight = 0.5;
    let mut value = 0.0;
    for &b in msg.bits() {
        if b {
            value += weight;
        }
        weight *= 0.5;
    }
    value
}

/// Big-endian encoding of `value` on `bits` digits.
pub fn int_to_binary(value: u64, bits: usize) -> Result<BitMessage, CodecError> {
    check_width(bits)?;
    if value >> bits != 0 {
        return Err(CodecError::IntegerTooWide { value, bits });
    }
    Ok(BitMessage {
        bits: (0..bits).rev().map(|i| (value >> i) & 1 == 1).collect(),
    })
}

pub fn binary_to_int(msg: &BitMessage) -> u64 {
    msg.bits().iter().fold(0, |acc, &b| (acc << 1) | b as u64)
}

/// Smallest width able to carry every integer in `0..=max_value`.
pub fn int_width(max_value: u64) -> usize {
    (u64::BITS - max_value.leading_zeros()).max(1) as usize
}

/// Channel configuration shared by a sender and a receiver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodecParams {
    channel: Arm,
    tau: usize,
    park_set: Vec<Arm>,
}

impl CodecParams {
    /// `park_set` is sorted ascending and must not contain the channel.
    pub fn new(channel: Arm, tau: usize, mut park_set: Vec<Arm>) -> Result<Self, CodecError> {
        if tau == 0 {
            return Err(CodecError::ZeroTau);
        }
        if park_set.is_empty() {
            return Err(CodecError::EmptyParkSet);
        }
        if park_set.contains(&channel) {
            return Err(CodecError::ChannelInParkSet(channel));
        }
        park_set.sort_unstable();
        park_set.dedup();
        Ok(CodecParams {
            channel,
            tau,
            park_set,
        })
    }

    /// Parks on every arm of `active` except the channel.
    pub fn over_active(channel: Arm, tau: usize, active: &[Arm]) -> Result<Self, CodecError> {
        let park = active.iter().copied().filter(|&a| a != channel).collect();
        Self::new(channel, tau, park)
    }

    pub fn channel(&self) -> Arm {
        self.channel
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn park_set(&self) -> &[Arm] {
        &self.park_set
    }
}

/// Arms the sender pulls, τ slots per bit. Bit q (counted from 1 within
/// `msg`) set to 1 parks on entry `q mod |park_set|`; a 0 jams the channel.
pub fn encode_schedule(msg: &BitMessage, params: &CodecParams) -> Vec<Arm> {
    let mut out = Vec::with_capacity(msg.len() * params.tau);
    for (i, &bit) in msg.bits().iter().enumerate() {
        let arm = if bit {
            params.park_set[(i + 1) % params.park_set.len()]
        } else {
            params.channel
        };
        out.extend(std::iter::repeat_n(arm, params.tau));
    }
    out
}

/// Reads one bit per τ rewards: 1 iff any of them is nonzero.
pub fn decode_window(rewards: &[Reward], tau: usize) -> Result<BitMessage, CodecError> {
    if tau == 0 {
        return Err(CodecError::ZeroTau);
    }
    if !rewards.len().is_multiple_of(tau) {
        return Err(CodecError::RaggedWindow {
            tau,
            got: rewards.len(),
        });
    }
    Ok(BitMessage {
        bits: rewards
            .chunks(tau)
            .map(|w| w.iter().any(|&r| r > 0))
            .collect(),
    })
}

/// Streaming receiver: feed rewards one slot at a time.
#[derive(Debug, Clone)]
pub struct Receiver {
    tau: usize,
    total_bits: usize,
    slot_in_bit: usize,
    current: bool,
    bits: Vec<bool>,
}

impl Receiver {
    pub fn new(tau: usize, total_bits: usize) -> Self {
        Receiver {
            tau,
            total_bits,
            slot_in_bit: 0,
            current: false,
            bits: Vec::with_capacity(total_bits),
        }
    }

    pub fn is_done(&self) -> bool {
        self.bits.len() == self.total_bits
    }

    pub fn push(&mut self, reward: Reward) {
        debug_assert!(!self.is_done());
        self.current |= reward > 0;
        self.slot_in_bit += 1;
        if self.slot_in_bit == self.tau {
            self.bits.push(self.current);
            self.current = false;
            self.slot_in_bit = 0;
        }
    }

    pub fn into_message(self) -> BitMessage {
        BitMessage { bits: self.bits }
    }
}
