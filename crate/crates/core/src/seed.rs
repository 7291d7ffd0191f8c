//! Seed derivation for reproducible, schedule-independent random streams.

/// One round of the SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed for stream `k` of a master `seed`.
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(k.wrapping_add(0x632b_e59b_d9b4_e019)))
}

/// Derives a sub-seed from a path of stream indices.
pub fn derive_seed_path(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(seed, |s, &k| derive_seed(s, k))
}
