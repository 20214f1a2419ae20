//! Deterministic per-task seed derivation.
//!
//! Scans run their points in parallel; each point owns an RNG stream seeded
//! from (master seed, point index) so that serial and parallel runs — and
//! reruns of any single point — produce identical draws.

/// Derive an independent stream seed from a master seed and task index.
///
/// SplitMix64 finalizer over `master + (index+1)·φ₆₄`: a bijective avalanche
/// mix, so distinct (master, index) pairs map to well-separated seeds even
/// for consecutive indices.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
