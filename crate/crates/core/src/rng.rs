//! Seeded random substreams.
//!
//! Every stochastic decision in the crate is drawn from a stream keyed by
//! `(seed, domain, index)`, so results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream domains. Distinct domains never share key material.
pub mod domain {
    pub const TRACE: u64 = 0x7472_6163_6500_0001;
    pub const SIGNS: u64 = 0x7369_676e_7300_0002;
    pub const CARRIER: u64 = 0x6361_7272_6900_0003;
    pub const CONFIG: u64 = 0x636f_6e66_6900_0004;
    pub const AUGMENT: u64 = 0x6175_676d_6500_0005;
    pub const TRACE_SEED: u64 = 0x7472_7365_6500_0006;
    pub const PLACEMENT: u64 = 0x706c_6163_6500_0007;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a seed with a domain tag and an index into a new 64-bit seed.
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(domain)) ^ index.rotate_left(17))
}

/// Independent generator for item `index` of `domain` under `seed`.
pub fn substream(seed: u64, domain: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(domain)));
    rng.set_stream(index);
    rng
}
