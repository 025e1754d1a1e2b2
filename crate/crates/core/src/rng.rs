//! Counter-based random streams.
//!
//! Every draw is a pure function of `(seed, index)`: ChaCha8 is a counter-mode
//! cipher, and each normal consumes exactly four 32-bit words, so the `j`-th
//! normal of a stream sits at word position `4j` regardless of how the stream
//! was traversed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS_PER_NORMAL: u128 = 4;

/// SplitMix64 finalizer; derives independent child seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sequential standard normals of the stream keyed by `seed`.
pub struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Positions the stream at draw `index`.
    pub fn at(seed: u64, index: u64) -> Self {
        let mut s = Self::new(seed);
        s.rng.set_word_pos(index as u128 * WORDS_PER_NORMAL);
        s
    }

    pub fn next_normal(&mut self) -> f64 {
        // Box-Muller, cosine branch only so the word budget stays fixed.
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn next_uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// The `index`-th standard normal of stream `seed`.
pub fn normal_at(seed: u64, index: u64) -> f64 {
    NormalStream::at(seed, index).next_normal()
}
