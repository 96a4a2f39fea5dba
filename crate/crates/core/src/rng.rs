//! Counter-style substream derivation for order-independent Monte-Carlo runs.
//!
//! Every random draw in a sweep is addressed by `(master_seed, trial, lane)`.
//! The lane picks the ChaCha key, the trial picks the ChaCha stream, so a trial
//! produces the same numbers no matter which worker runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Lane for the random payload of a trial (symbols, then noise).
pub const PAYLOAD_LANE: u64 = 0;
/// Lanes `CHANNEL_LANE_BASE + k` carry user `k`'s channel draw.
pub const CHANNEL_LANE_BASE: u64 = 1 << 32;
/// Lane used by the invariant suites when they need free-standing instances.
pub const PROPERTY_LANE: u64 = 1 << 48;

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Independent generator for one `(trial, lane)` cell under `master_seed`.
pub fn substream(master_seed: u64, trial: u64, lane: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = splitmix64(master_seed) ^ splitmix64(lane.wrapping_mul(0xd1b5_4a32_d192_ed03));
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(trial);
    rng
}
