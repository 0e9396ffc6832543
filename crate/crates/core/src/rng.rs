//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! keyed by a base seed and a purpose tag, so streams never overlap.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const TAG_INIT: u64 = 0x1a17;
pub(crate) const TAG_SHUFFLE: u64 = 0x5fff;
pub(crate) const TAG_MEANS: u64 = 0x3ea5;
pub(crate) const TAG_TRAIN: u64 = 0x7a11;
pub(crate) const TAG_TEST: u64 = 0x7e57;

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn stream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let key = mix(mix(seed ^ mix(tag)).wrapping_add(index));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(tag);
    rng
}
