//! Deterministic seed derivation. Every stochastic piece of a run draws from
//! a ChaCha stream seeded through here, so one top-level seed pins the whole
//! output byte for byte, and independent sub-tasks (per measurement setting,
//! per resampling trial) can run in any order without sharing an RNG.

/// SplitMix64 step; the standard finalizer constants.
fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a salt. Children with
/// different salts are statistically independent; the same pair always maps
/// to the same child.
pub fn derive(parent: u64, salt: u64) -> u64 {
    splitmix64(parent ^ splitmix64(salt))
}

/// Salt for a (preparation, analyzer) measurement setting.
pub fn setting_salt(prep_index: usize, analyzer_index: usize) -> u64 {
    (prep_index as u64) * 6 + analyzer_index as u64
}

/// Namespaces for the per-scenario streams hanging off the top-level seed.
pub mod scope {
    pub const SCAN_DELAY: u64 = 0x01;
    pub const SCAN_ANGLE: u64 = 0x02;
    pub const SCAN_ENERGY: u64 = 0x03;
    pub const TOMOGRAPHY: u64 = 0x04;
    pub const MONTE_CARLO: u64 = 0x05;
    pub const ENERGY_FIDELITY: u64 = 0x06;
}
