//! Named random streams.
//!
//! One root seed fans out into independent ChaCha streams, one per
//! consumer, so adding draws in one module never shifts another module's
//! sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Workload = 1,
    Dypr = 2,
    DdpgInit = 3,
    DdpgNoise = 4,
    DdpgSample = 5,
    DdqlInit = 6,
    DdqlEpsilon = 7,
    DdqlSample = 8,
}

pub fn stream(root: u64, which: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(which as u64);
    rng
}

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
