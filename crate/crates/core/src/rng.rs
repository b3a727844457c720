//! Seeded random streams.
//!
//! Every consumer of randomness gets its own ChaCha8 stream derived from a
//! run seed and a fixed stream id, so adding a layer or a draw in one place
//! never shifts the numbers seen elsewhere. Baseline and embodied networks
//! built from the same seed therefore share the initial weights of every
//! layer they have in common.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub const SUBSET: u64 = 1;
pub const SHUFFLE: u64 = 2;
pub const PRETRAIN: u64 = 3;
/// Parameter initialization streams start here, one per layer index.
pub const INIT_BASE: u64 = 100;
/// Dropout mask streams start here, one per layer index.
pub const DROPOUT_BASE: u64 = 200;

pub fn stream(seed: u64, id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
