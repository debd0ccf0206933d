//! Deterministic seed derivation for independent RNG streams.

/// SplitMix64 finalizer; bijective and well-mixed, so derived seeds from
/// nearby inputs behave as independent.
pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives the seed for stream `index` under namespace `tag` from a base seed.
pub(crate) fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base ^ tag.rotate_left(17)) ^ index)
}
