//! Seed derivation. Every stochastic component owns a `ChaCha8Rng` derived
//! from the run seed and a label, so parallel cells never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a sequence of integer labels.
pub fn derive_seed(base: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix(base), |acc, &l| splitmix(acc ^ splitmix(l)))
}

/// FNV-1a over a string label, for mixing names into seeds.
pub fn label(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

pub fn rng_for(base: u64, labels: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(base, labels))
}
