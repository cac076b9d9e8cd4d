//! Seed derivation.
//!
//! All randomness descends from one 64-bit seed. A [`SeedStream`] hands out
//! ChaCha8 generators keyed by `(seed, stream)`; ChaCha is counter based, so a
//! trial's generator depends only on its index and never on how many other
//! trials ran before it or on which worker ran them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StdRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream {
    seed: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        SeedStream { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Generator for stream `index` under this seed.
    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }

    /// A child stream family, for nesting (e.g. trial → per-query streams).
    pub fn child(&self, index: u64) -> SeedStream {
        // splitmix64 finalizer over the pair
        let mut z = self.seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        SeedStream { seed: z ^ (z >> 31) }
    }
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    SeedStream::new(seed).rng(0)
}
