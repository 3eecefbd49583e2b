//! Deterministic random streams. Every random choice in the crate draws
//! from a ChaCha8 generator derived from a user seed and a fixed stream id.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Independent generator for `(seed, stream)`.
pub fn seeded(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

// Stream ids, fixed so that adding a consumer never shifts another.
pub(crate) const STREAM_SPLIT: u64 = 0x10;
pub(crate) const STREAM_SYNTH: u64 = 0x20;
pub(crate) const STREAM_CBOW_INIT: u64 = 0x30;
pub(crate) const STREAM_CBOW_TRAIN: u64 = 0x31;
pub(crate) const STREAM_SMO: u64 = 0x40;
pub(crate) const STREAM_NN_INIT: u64 = 0x50;
pub(crate) const STREAM_NN_TRAIN: u64 = 0x51;
