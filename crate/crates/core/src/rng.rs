//! Seeded random streams.
//!
//! Every experiment cell derives its randomness from `(seed, stream)` so that a
//! single cell can be regenerated without replaying the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags mixed into the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Train = 1,
    Test = 2,
    Noise = 3,
    Features = 4,
    Anchor = 5,
    Bootstrap = 6,
    Misc = 7,
}

/// Deterministic generator for `seed`, sub-stream `stream` and an extra key
/// (typically the sample size of the cell).
pub fn stream_rng(seed: u64, stream: Stream, key: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key.wrapping_mul(16).wrapping_add(stream as u64));
    rng
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
