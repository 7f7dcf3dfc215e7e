//! Seed derivation. Every random quantity in the crate is drawn from a ChaCha
//! stream addressed by `(seed, purpose, index)`, so results do not depend on the
//! order in which parallel workers run.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type StreamRng = ChaCha20Rng;

/// Purpose tags keep streams of different consumers disjoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Weights = 1,
    Graph = 2,
    Gaussian = 3,
    Dataset = 4,
    Truth = 5,
}

/// Independent stream for item `index` of `purpose` under master `seed`.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> StreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 56) ^ index);
    rng
}

/// Derives a child master seed, e.g. for repetition `index` of an experiment.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    use rand::RngCore;
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    rng.set_stream(index);
    rng.next_u64()
}
