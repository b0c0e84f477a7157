//! Deterministic derivation of independent random streams from one master
//! seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream families; each gets its own seed space.
#[derive(Clone, Copy, Debug)]
pub enum Stream {
    TaskInit = 1,
    SharedInit = 2,
    NodeDropout = 3,
    Schedule = 4,
    Synth = 5,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for stream `(kind, id)` under `master`. Streams for different ids
/// never depend on how many other ids exist.
pub fn derive(master: u64, kind: Stream, id: u64) -> u64 {
    splitmix(splitmix(splitmix(master) ^ kind as u64) ^ id)
}

pub fn rng(master: u64, kind: Stream, id: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, kind, id))
}
