//! The one seeded generator used everywhere datasets and folds are drawn.
//!
//! ChaCha8 has a stable output stream across platforms and crate versions,
//! so a manifest seed reproduces the same instances on any build.

pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Derives an independent stream seed from a base seed and a label.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
