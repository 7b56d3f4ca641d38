//! Seed derivation.
//!
//! Every random stream is keyed by a master seed plus a path of integer tags
//! (chain index, party index, coalition mask, ...). Streams with different
//! tag paths are independent, so adding a chain or a party never perturbs the
//! draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a seed and a tag path into a single 64-bit key.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut h = splitmix64(seed);
    for &t in tags {
        h = splitmix64(h ^ splitmix64(t.wrapping_add(0x6A09_E667_F3BC_C909)));
    }
    h
}

/// An independent generator for `(seed, tags...)`.
pub fn stream(seed: u64, tags: &[u64]) -> SimRng {
    let mut h = derive_seed(seed, tags);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        h = splitmix64(h);
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    SimRng::from_seed(key)
}

// Tag namespaces, so that e.g. chain 3 and party 3 never share a stream.
pub(crate) const TAG_CHAIN: u64 = 0xC4A1;
pub(crate) const TAG_PERTURB: u64 = 0x9E27;
pub(crate) const TAG_PARTY: u64 = 0x9A27;
pub(crate) const TAG_PRIOR: u64 = 0x9210;
pub(crate) const TAG_THETA: u64 = 0x7E7A;
pub(crate) const TAG_TEST: u64 = 0x7E57;
pub(crate) const TAG_FURTHER: u64 = 0xF0F0;
