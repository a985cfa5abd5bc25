//! Reproducible random streams.
//!
//! Every stream is a ChaCha8 keystream keyed by a 64-bit seed and addressed by a
//! 64-bit stream id, so `(seed, replicate, purpose)` always maps to the same
//! sequence regardless of platform, thread count or evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    StartPoint = 0,
    Samples = 1,
    Other = 15,
}

/// The stream for `(seed, index, purpose)`.
pub fn stream(seed: u64, index: u64, purpose: Purpose) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_mul(16).wrapping_add(purpose as u64));
    rng
}
