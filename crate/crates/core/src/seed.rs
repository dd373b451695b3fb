//! Deterministic seed derivation for replicated Monte Carlo studies.

/// SplitMix64 output function; a bijection on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for replication `rep` of cell `cell`.
///
/// Injective in `(cell, rep)` for fixed `master` as long as both indices fit
/// in 32 bits, and independent of how many replications are requested.
pub fn replication_seed(master: u64, cell: u32, rep: u32) -> u64 {
    master ^ mix64(((cell as u64) << 32) | rep as u64)
}
