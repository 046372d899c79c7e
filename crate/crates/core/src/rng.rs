//! Deterministic per-sample random streams.
//!
//! Every trajectory (or synthetic sample) owns a stream derived from
//! `(master seed, purpose, iteration, index)`. Batches can therefore be drawn
//! in any order or on any number of threads without changing a single bit of
//! the result.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RngStream = ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Init,
    Checkpoint,
    Hessian,
    Correction,
    Subsolver,
    Evaluation,
    Batch,
    Diagnostic,
    Custom(u64),
}

impl Purpose {
    fn code(self) -> u64 {
        match self {
            Purpose::Init => 1,
            Purpose::Checkpoint => 2,
            Purpose::Hessian => 3,
            Purpose::Correction => 4,
            Purpose::Subsolver => 5,
            Purpose::Evaluation => 6,
            Purpose::Batch => 7,
            Purpose::Diagnostic => 8,
            Purpose::Custom(c) => 0x1000_0000_0000_0000 ^ c,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for sample `index` of `purpose` at `iteration`.
pub fn stream(seed: u64, purpose: Purpose, iteration: u64, index: u64) -> RngStream {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ purpose.code());
    h = splitmix64(h ^ iteration);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        h = splitmix64(h);
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
