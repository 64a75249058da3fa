//! Counter-derived random substreams.
//!
//! Every random quantity is drawn from a ChaCha8 stream keyed by the run seed
//! and addressed by `(kind, index)`. Two draws with different addresses never
//! share state, so results do not depend on evaluation order or thread count,
//! and resizing one entity kind leaves the others untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for. The discriminant becomes the high bits of
/// the ChaCha stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum StreamKind {
    Agent = 1,
    Alternative = 2,
    Ranking = 3,
    Observation = 4,
    Pairing = 5,
    PairSample = 6,
    Trial = 7,
    Planted = 8,
}

pub type StreamRng = ChaCha8Rng;

const INDEX_BITS: u32 = 48;

/// Opens the substream for `(seed, kind, index)`.
pub fn substream(seed: u64, kind: StreamKind, index: u64) -> StreamRng {
    debug_assert!(index < (1 << INDEX_BITS));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((kind as u64) << INDEX_BITS) | index);
    rng
}

/// Derives a child seed, for nested experiments (trial `t` of run `seed`).
/// SplitMix64 finalizer over the pair.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
