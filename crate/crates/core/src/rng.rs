//! Seed derivation and per-channel random streams.
//!
//! Every stream is a ChaCha8 keystream keyed by the run seed, so a channel's
//! draws depend only on `(seed, channel)` and never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream reserved for drawing iid initial states.
pub const INIT_STREAM: u64 = u64::MAX;

/// Run seed for replicate `replicate` at scale `n` of a sweep seeded with
/// `base`.
pub fn derive_seed(base: u64, n: u32, replicate: u32) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(n as u64);
    rng.set_word_pos(2 * replicate as u128);
    rand::RngCore::next_u64(&mut rng)
}

/// Independent generator for `stream` under run seed `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
