//! Seed derivation. Every random choice in a run is a pure function of the
//! configured seed and a stream tag, so reruns reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finaliser.
fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Combines a base seed with any number of stream coordinates.
pub fn derive_seed(seed: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(mix(seed), |acc, &c| mix(acc ^ mix(c)))
}

pub fn rng_for(seed: u64, coords: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, coords))
}

/// Stream tags so that independent consumers of one seed never collide.
pub(crate) mod stream {
    pub const GRAPH: u64 = 0x6752_4150_4800_0001;
    pub const TOPOLOGY_STEP: u64 = 0x6752_4150_4800_0002;
    pub const DELAY: u64 = 0x6465_6C61_7900_0003;
    pub const REJECTION: u64 = 0x7265_6A65_6374_0004;
}
