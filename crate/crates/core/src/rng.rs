//! Seeded random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream keyed by
//! `(master_seed, stream_id)`; per-shot draws additionally jump to a fixed
//! word offset derived from the cycle id, so results do not depend on the
//! order or thread in which sites and cycles are simulated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 32-bit words reserved for one shot (16 `f64` draws).
pub const WORDS_PER_SHOT: u128 = 64;

pub const SITE_PROPERTIES_STREAM: u64 = 1 << 40;
pub const CYCLE_ORDER_STREAM: u64 = (1 << 40) + 1;
pub const ASSEMBLY_STREAM: u64 = (1 << 40) + 2;
pub const PROBE_STREAM_BASE: u64 = 1 << 32;

pub fn stream(master_seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    rng
}

/// Positions `rng` at the start of the block reserved for `cycle`.
pub fn seek_cycle(rng: &mut ChaCha8Rng, cycle: u64) {
    rng.set_word_pos(cycle as u128 * WORDS_PER_SHOT);
}
