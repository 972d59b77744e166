//! Deterministic random streams.
//!
//! Every Monte-Carlo unit of work (a drop, a trial, a sample batch) draws from
//! its own ChaCha stream derived from the master seed and a stream index, so
//! results do not depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Well-known stream tags so independent consumers of one master seed never
/// share a stream.
pub mod purpose {
    pub const NMSE_OPT_SAMPLES: u64 = 1;
    pub const DROPS: u64 = 2;
    pub const DESIGN: u64 = 3;
}

pub fn master(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `index` of family `purpose` under `seed`.
pub fn stream(seed: u64, purpose: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}
