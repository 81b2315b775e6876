//! SplitMix64 stream.
//!
//! State update: `state += 0x9E3779B97F4A7C15`, then the output mix
//! `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9; z = (z ^ (z >> 27)) * 0x94D049BB133111EB;
//! z ^ (z >> 31)`. Uniforms keep the top 53 bits. Normals use Box–Muller on two
//! consecutive uniforms and return only the cosine branch, so every normal draw
//! consumes exactly two outputs.

use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 output finalizer.
#[inline]
pub fn splitmix64_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the `index`-th child of `parent`.
///
/// Equal to the `index`-th output (0-based) of a stream seeded with `parent`,
/// so children are independent of the order in which they are requested.
pub fn child_seed(parent: u64, index: u64) -> u64 {
    splitmix64_mix(parent.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomStream {
    seed: u64,
    state: u64,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        RandomStream { seed, state: seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A fresh stream for sub-task `index`, independent of this stream's position.
    pub fn child(&self, index: u64) -> RandomStream {
        RandomStream::new(child_seed(self.seed, index))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        splitmix64_mix(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn next_uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        let u1 = self.next_uniform();
        let u2 = self.next_uniform();
        // 1 - u1 lies in (0, 1], keeping the log finite
        let radius = (-2.0 * (1.0 - u1).ln()).sqrt();
        radius * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform integer in `0..bound` by rejection, free of modulo bias.
    pub fn next_below(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "next_below needs a positive bound");
        let bound = bound as u64;
        let limit = u64::MAX - u64::MAX % bound;
        loop {
            let v = self.next_u64();
            if v < limit {
                return (v % bound) as usize;
            }
        }
    }

    /// In-place Fisher–Yates shuffle (Durstenfeld, swapping from the back).
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct indices from `0..n` in draw order (partial Fisher–Yates).
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        let k = k.min(n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.next_below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}
