//! Deterministic seeded randomness.
//!
//! Every random decision in the artifact flows through [`SeededRng`] streams
//! derived from a single root seed plus a consumer label. Derivation hashes
//! `(seed, label)` so adding a new consumer never perturbs the draws seen by
//! existing ones, and identical seeds reproduce identical sequences bit for
//! bit across runs.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// A deterministic random stream.
#[derive(Debug, Clone)]
pub struct SeededRng {
    chacha: ChaCha12Rng,
}

impl SeededRng {
    /// Root stream for a seed; equivalent to `derive(seed, "root")`.
    pub fn new(seed: u64) -> Self {
        Self::derive(seed, "root")
    }

    /// Derives an independent stream from `(seed, label)`.
    pub fn derive(seed: u64, label: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        hasher.update([0u8]);
        hasher.update(label.as_bytes());
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        SeededRng {
            chacha: ChaCha12Rng::from_seed(key),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.chacha.next_u64()
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Uniform index in `[0, n)`. Panics if `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index: empty range");
        // Multiply-shift keeps the draw cheap; bias is negligible at the
        // range sizes used here (candidate sets, shuffles).
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    /// Samples `k` distinct indices from `[0, n)` in draw order.
    pub fn sample_distinct(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "sample_distinct: k={k} exceeds n={n}");
        let mut pool: Vec<usize> = (0..n).collect();
        let mut out = Vec::with_capacity(k);
        for _ in 0..k {
            let j = self.index(pool.len());
            out.push(pool.swap_remove(j));
        }
        out
    }

    /// Samples an index proportionally to non-negative `weights`.
    ///
    /// Panics if `weights` is empty or sums to a non-positive value.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        assert!(!weights.is_empty(), "categorical: empty weights");
        let total: f64 = weights.iter().sum();
        assert!(
            total.is_finite() && total > 0.0,
            "categorical: weights must sum to a positive finite value"
        );
        let target = self.next_f64() * total;
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if target < acc {
                return i;
            }
        }
        weights.len() - 1
    }
}
