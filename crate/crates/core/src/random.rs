//! Seedable, counter-based randomness injected into every stochastic operation.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::Scalar;

/// ChaCha8 keystream generator. Identical seeds always give identical streams.
#[derive(Clone, Debug)]
pub struct RandomSource(ChaCha8Rng);

impl RandomSource {
    pub fn seeded(seed: u64) -> Self {
        RandomSource(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Independent stream `stream` under the same seed.
    pub fn stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RandomSource(rng)
    }

    pub fn uniform<S: Scalar>(&mut self) -> S {
        S::lit(self.0.random::<f64>())
    }

    pub fn uniform_range<S: Scalar>(&mut self, lo: S, hi: S) -> S {
        lo + (hi - lo) * self.uniform::<S>()
    }

    pub fn normal<S: Scalar>(&mut self) -> S {
        let x: f64 = StandardNormal.sample(&mut self.0);
        S::lit(x)
    }

    pub fn normals<S: Scalar>(&mut self, n: usize) -> Vec<S> {
        (0..n).map(|_| self.normal()).collect()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        use rand::seq::SliceRandom;
        items.shuffle(&mut self.0);
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

/// SplitMix64 finalizer; used to derive well-separated child seeds.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
