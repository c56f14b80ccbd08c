//! Seeded random number generation.
//!
//! All randomness in the crate flows through [`SeededRng`], a ChaCha20
//! stream cipher generator (`rand_chacha`). The 64-bit user seed is expanded
//! to a 256-bit key with `SeedableRng::seed_from_u64`, and independent
//! sub-generators are obtained by selecting a ChaCha stream id. ChaCha output
//! is defined bit-for-bit by its specification, so the same seed yields the
//! same draws on every platform.
//!
//! Uniform variates are produced as `(next_u64() >> 11) * 2^-53`, which is
//! exact and platform independent. Gaussian variates use the ziggurat sampler
//! of `rand_distr`; they are reproducible for a fixed lockfile but depend on
//! the platform `exp`/`ln` for tail draws.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

/// Identifies the generator and variate construction above. Bumped whenever
/// the mapping from seeds to draws changes.
pub const RNG_VERSION: &str = "chacha20-stream-v1";

/// Deterministic, splittable generator.
#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: ChaCha20Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Generator for sub-task `stream` of `seed`; distinct streams never overlap.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn normal_vec(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.normal()).collect()
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SeededRng::new(7);
        let mut b = SeededRng::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn streams_differ() {
        let mut a = SeededRng::with_stream(7, 0);
        let mut b = SeededRng::with_stream(7, 1);
        let xs: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut r = SeededRng::new(1);
        let mut sum = 0.0;
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
            sum += u;
        }
        assert!((sum / 10_000.0 - 0.5).abs() < 0.02);
    }

    const FIRST_DRAW_SEED_42: u64 = 9_482_535_800_248_027_256;

    #[test]
    fn pinned_first_draw() {
        // Guards the seed-to-draw mapping advertised by RNG_VERSION.
        let a = SeededRng::new(42).next_u64();
        assert_eq!(a, FIRST_DRAW_SEED_42, "first draw for seed 42 is {a}");
        assert_ne!(a, SeededRng::new(43).next_u64());
    }
}
