//! Seeded, splittable random streams.
//!
//! Every simulated experiment draws from a ChaCha8 stream identified by a
//! `(seed, stream)` pair so runs can be replayed bit for bit and independent
//! runs can be handed to different threads without changing their output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` derived from `seed`.
pub fn split(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Index drawn from a discrete distribution by inverting its CDF.
pub fn categorical(probabilities: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, p) in probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // u landed in the rounding slack above the last partial sum
    probabilities.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}
