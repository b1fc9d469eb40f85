//! Seeded random streams.
//!
//! Every consumer draws from ChaCha8 keyed by an explicit `u64` seed, with a
//! distinct stream id per purpose so that independent uses of one seed never
//! share a sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub(crate) const STREAM_MEANS: u64 = 1;
pub(crate) const STREAM_NOISE: u64 = 2;
pub(crate) const STREAM_SHUFFLE: u64 = 3;
pub(crate) const STREAM_VAL_BATCH: u64 = 4;
pub(crate) const STREAM_TRAIN: u64 = 5;
/// Mixture draws use `STREAM_DRAW_BASE + draw`.
pub(crate) const STREAM_DRAW_BASE: u64 = 1 << 32;

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fisher-Yates permutation of `0..n`.
pub fn permutation(rng: &mut Rng, n: usize) -> alloc::vec::Vec<usize> {
    use rand::seq::SliceRandom;
    let mut idx: alloc::vec::Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}
