//! Seed derivation for per-component random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The counter-based generator every randomized component draws from.
pub type ComponentRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `parent` and a component label. Stable across
/// platforms and releases: FNV-1a over the label mixed through splitmix64.
pub fn derive_seed(parent: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    splitmix64(splitmix64(parent) ^ h)
}

pub fn rng_from_seed(seed: u64) -> ComponentRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random stream for the component `label` of a run seeded with `parent`.
pub fn component_rng(parent: u64, label: &str) -> ComponentRng {
    rng_from_seed(derive_seed(parent, label))
}
