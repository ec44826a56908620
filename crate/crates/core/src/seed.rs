//! Seed derivation and the counter-based draws used by the environment.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw in [0, 1) addressed by (key, slot, arm). Pure, so draws can
/// be generated lazily and in any order.
#[inline]
pub fn keyed_uniform(key: u64, slot: u64, arm: u64) -> f64 {
    let bits = mix64(mix64(key ^ mix64(slot)) ^ arm.wrapping_mul(GOLDEN));
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Seed of the environment for run `run_id`.
pub fn env_seed(master: u64, run_id: u64) -> u64 {
    mix64(mix64(master) ^ run_id.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Seed handed to player `player` of run `run_id`.
pub fn player_seed(master: u64, run_id: u64, player: u64) -> u64 {
    mix64(env_seed(master, run_id) ^ mix64(player.wrapping_add(1).wrapping_mul(GOLDEN)))
}
