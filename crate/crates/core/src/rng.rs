//! Portable seeded randomness with one independent stream per sample.
//!
//! The generator is ChaCha8 (`rand_chacha`). The 256-bit key holds the run
//! seed and the epoch (both little-endian u64, the rest zero) and the ChaCha
//! stream id is the sample index, so sample `i` of epoch `e` always draws the
//! same numbers no matter which thread produces it or in what order.
//!
//! Floats and integers are derived from raw `u64` words with fixed formulas
//! below instead of `rand`'s distribution code, so the decisions do not depend
//! on a particular `rand` release.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Name recorded in policy files and sidecars.
pub const GENERATOR_NAME: &str = "chacha8";

/// Stream id reserved for the per-epoch shuffle.
pub const SHUFFLE_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone)]
pub struct SampleRng {
    inner: ChaCha8Rng,
}

impl SampleRng {
    /// Generator for sample `index` of `epoch` under run seed `seed`.
    pub fn for_sample(seed: u64, epoch: u64, index: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&epoch.to_le_bytes());
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(index);
        Self { inner }
    }

    /// Generator driving the sample order of `epoch`.
    pub fn for_shuffle(seed: u64, epoch: u64) -> Self {
        Self::for_sample(seed, epoch, SHUFFLE_STREAM)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`; exactly `lo` when `lo == hi`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Unbiased integer in `[0, n)` by rejection. `n` must be non-zero.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty integer range");
        // 2^64 mod n, the size of the biased tail
        let tail = (u64::MAX % n + 1) % n;
        loop {
            let x = self.next_u64();
            if tail == 0 || x <= u64::MAX - tail {
                return x % n;
            }
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let draw = |mut r: SampleRng| -> Vec<u64> { (0..4).map(|_| r.next_u64()).collect() };
        let a = draw(SampleRng::for_sample(7, 0, 3));
        let b = draw(SampleRng::for_sample(7, 0, 3));
        assert_eq!(a, b);
        let mut other = SampleRng::for_sample(7, 0, 4);
        assert_ne!(a[0], other.next_u64());
        let mut epoch = SampleRng::for_sample(7, 1, 3);
        assert_ne!(a[0], epoch.next_u64());
    }

    #[test]
    fn first_word_is_pinned() {
        // Guards against silent changes of the underlying generator.
        let mut r = SampleRng::for_sample(42, 0, 0);
        let first = r.next_u64();
        let mut again = SampleRng::for_sample(42, 0, 0);
        assert_eq!(first, again.next_u64());
        assert_eq!(first, PINNED_FIRST_WORD);
    }

    const PINNED_FIRST_WORD: u64 = 6424161053832095879;

    #[test]
    fn degenerate_uniform_is_exact() {
        let mut r = SampleRng::for_sample(1, 2, 3);
        for _ in 0..100 {
            assert_eq!(r.uniform(300.0, 300.0), 300.0);
        }
    }

    #[test]
    fn below_stays_in_range() {
        let mut r = SampleRng::for_sample(5, 0, 0);
        let mut seen = [0usize; 7];
        for _ in 0..7000 {
            seen[r.below(7) as usize] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800 && c < 1200), "{seen:?}");
    }

    #[test]
    fn shuffle_is_permutation() {
        let mut v: Vec<usize> = (0..50).collect();
        SampleRng::for_shuffle(3, 1).shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_ne!(v, sorted);
    }
}
