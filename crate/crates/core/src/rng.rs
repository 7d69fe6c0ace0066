//! Deterministic seed derivation.
//!
//! Every random stream in a run is keyed by the run seed plus a tuple of
//! stable identifiers, so adding a UE or a carrier never perturbs the draws
//! of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the bytes of a string; stable across platforms and releases.
pub fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x6a09_e667_f3bc_c908, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parts))
}

/// Domain tags keeping unrelated streams apart.
pub mod domain {
    pub const CANDIDATES: u64 = 1;
    pub const PDCCH_LOAD: u64 = 2;
    pub const SPECTRAL_EFFICIENCY: u64 = 3;
    pub const TRAFFIC: u64 = 4;
    pub const PDCCH_QUALITY: u64 = 5;
}
