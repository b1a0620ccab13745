use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent seed for one trial and purpose, stable across thread counts.
pub fn derive_seed(master: u64, trial: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ trial) ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn trial_rng(master: u64, trial: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, trial, stream))
}

/// Stream tags.
pub const WALK: u64 = 0;
pub const SCENERY: u64 = 1;
pub const CORRUPTION: u64 = 2;
pub const ORACLE: u64 = 3;
