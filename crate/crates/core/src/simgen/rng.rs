//! Deterministic, portable randomness for the generator.
//!
//! Every random draw in the simulator comes from a ChaCha8 stream whose
//! 64-bit seed is derived by SplitMix64 mixing of `(seed, domain, index)`.
//! The rule is fixed so that scene generation, per-frame rendering,
//! shuffling and subset selection each consume independent streams and the
//! whole pipeline reproduces bit-for-bit across platforms. Frames can be
//! rendered concurrently because each frame's stream depends only on
//! `(seed, DOMAIN_FRAME, frame_index)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DOMAIN_SCENE: u64 = 1;
pub const DOMAIN_EMBED: u64 = 2;
pub const DOMAIN_FRAME: u64 = 3;
pub const DOMAIN_ORDER: u64 = 4;
pub const DOMAIN_SUBSET: u64 = 5;
pub const DOMAIN_VALIDATION: u64 = 6;
pub const DOMAIN_VIEWFEAT: u64 = 7;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Stream for a `(seed, domain, index)` triple.
pub fn derive_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mixed = splitmix64(splitmix64(seed ^ splitmix64(domain)).wrapping_add(index));
    ChaCha8Rng::seed_from_u64(mixed)
}
