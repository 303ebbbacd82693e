//! Seeded, splittable random number generation.
//!
//! Every stochastic component (parameter init, dropout, shuffling, bagging)
//! draws from its own named substream so that adding or reordering one
//! component never perturbs another's stream. The generator is ChaCha12;
//! substream seeds are derived by FNV-1a hashing of the parent seed and the
//! substream label, so forking is stateless and independent of how much the
//! parent has already been consumed.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x00000100000001b3;

fn fnv1a(init: u64, bytes: &[u8]) -> u64 {
    let mut h = init;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha12Rng,
}

impl Rng {
    pub fn seed_from(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive an independent substream. Distinct labels give independent
    /// streams; the fork does not consume or depend on the parent's state.
    pub fn fork(&self, label: &str) -> Rng {
        let h = fnv1a(FNV_OFFSET, &self.seed.to_le_bytes());
        Rng::seed_from(fnv1a(h, label.as_bytes()))
    }

    /// Indexed variant of [`fork`](Self::fork) for per-item streams.
    pub fn fork_indexed(&self, label: &str, index: u64) -> Rng {
        let h = fnv1a(FNV_OFFSET, &self.seed.to_le_bytes());
        let h = fnv1a(h, label.as_bytes());
        Rng::seed_from(fnv1a(h, &index.to_le_bytes()))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform integer in [0, n). n must be nonzero.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Widening-multiply with rejection of the biased zone.
        let n = n as u64;
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    pub fn choose<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len())]
    }

    /// Sample an index from unnormalized non-negative weights.
    pub fn weighted(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let mut target = self.uniform() * total;
        for (i, &w) in weights.iter().enumerate() {
            target -= w;
            if target < 0.0 {
                return i;
            }
        }
        weights.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::seed_from(42);
        let mut b = Rng::seed_from(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn forks_are_independent_of_parent_state() {
        let mut a = Rng::seed_from(7);
        let b = Rng::seed_from(7);
        a.next_u64();
        a.next_u64();
        let mut fa = a.fork("emb");
        let mut fb = b.fork("emb");
        for _ in 0..10 {
            assert_eq!(fa.next_u64(), fb.next_u64());
        }
    }

    #[test]
    fn distinct_labels_distinct_streams() {
        let r = Rng::seed_from(7);
        let mut a = r.fork("a");
        let mut b = r.fork("b");
        let same = (0..20).filter(|_| a.next_u64() == b.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn uniform_in_range_and_centered() {
        let mut r = Rng::seed_from(13);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let v = r.uniform_in(-0.5, 0.5);
            assert!((-0.5..0.5).contains(&v));
            sum += v;
        }
        assert!((sum / n as f64).abs() < 0.01);
    }

    #[test]
    fn below_is_unbiased_enough() {
        let mut r = Rng::seed_from(99);
        let mut counts = [0usize; 5];
        for _ in 0..50_000 {
            counts[r.below(5)] += 1;
        }
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 500.0, "counts {counts:?}");
        }
    }

    #[test]
    fn shuffle_deterministic_per_seed() {
        let mut a: Vec<u32> = (0..50).collect();
        let mut b: Vec<u32> = (0..50).collect();
        Rng::seed_from(3).fork("shuffle").shuffle(&mut a);
        Rng::seed_from(3).fork("shuffle").shuffle(&mut b);
        assert_eq!(a, b);
        let mut c: Vec<u32> = (0..50).collect();
        Rng::seed_from(4).fork("shuffle").shuffle(&mut c);
        assert_ne!(a, c);
    }
}
