//! Deterministic random streams.
//!
//! Every parallel task draws from its own ChaCha8 stream keyed by the master
//! seed, a purpose tag and a task index, so results do not depend on how
//! tasks are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub mod tag {
    pub const ORBIT_STARTS: u64 = 1;
    pub const CALIBRATION: u64 = 2;
    pub const IID_CONTROL: u64 = 3;
    pub const LAW_SAMPLES: u64 = 4;
    pub const MIXING: u64 = 5;
    pub const RENEWAL: u64 = 6;
}

/// Stream `index` of family `tag` under `seed`.
pub fn stream(seed: u64, tag: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((tag << 48) | (index & ((1 << 48) - 1)));
    rng
}

/// Uniform variate in the open interval `(0, 1)`.
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(rand::distributions::Open01)
}
