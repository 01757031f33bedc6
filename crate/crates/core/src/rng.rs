//! Counter-based random streams: every (seed, domain, index) triple gets its
//! own independent generator, so parallel work never shares RNG state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Keeps streams for different purposes apart under one seed.
pub(crate) mod domain {
    pub const EXACT_SAMPLING: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const RECOVERY: u64 = 3;
    pub const BATCHES: u64 = 4;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a sub-seed, e.g. per outer iteration or per scan point.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix(seed ^ splitmix(tag))
}

pub(crate) fn stream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, domain));
    rng.set_stream(index);
    rng
}
