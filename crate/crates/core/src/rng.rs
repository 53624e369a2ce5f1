//! Counter-keyed random streams.
//!
//! Every random quantity draws from its own ChaCha8 stream selected by a key
//! built from `(quantity, user, slot)`, so adding users or slots never shifts
//! the draws of existing ones. The generator is pinned as [`RNG_NAME`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator identifier written into CSV headers and policy tables.
pub const RNG_NAME: &str = "chacha8-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Stream {
    Interference = 1,
    Direct = 2,
    Harvest = 3,
    PuActivity = 4,
    Sensing = 5,
    Trial = 6,
}

/// Independent generator for `(stream, user, slot)` under `seed`.
pub fn keyed(seed: u64, stream: Stream, user: usize, slot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let key = ((stream as u64) << 56) | ((user as u64 & 0xff_ffff) << 32) | (slot as u64 & 0xffff_ffff);
    rng.set_stream(key);
    rng
}

/// Seed for trial `trial` of an experiment seeded with `seed`.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    use rand::Rng;
    keyed(seed, Stream::Trial, 0, trial).random()
}
