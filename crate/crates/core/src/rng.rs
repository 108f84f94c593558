//! Deterministic randomness.
//!
//! Every randomized stage takes an explicit 64-bit seed and draws from a
//! ChaCha8 stream, so identical seeds and call sequences produce identical
//! results on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used throughout; a cheap, portable, fully seeded stream cipher.
pub type SeededRng = ChaCha8Rng;

/// Build the deterministic RNG for a seed.
pub fn seeded_rng(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

/// Derive a per-stage seed from a global seed and a stage label.
///
/// FNV-1a over the little-endian seed bytes followed by the label bytes;
/// stable across platforms and releases, so rerunning a later stage never
/// perturbs the streams of earlier ones.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = FNV_OFFSET;
    for byte in seed.to_le_bytes().iter().chain(label.as_bytes()) {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}
