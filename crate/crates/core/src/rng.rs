//! Deterministic, splittable random streams.
//!
//! Every stochastic routine in this crate takes an explicit [`Stream`].
//! A stream is a counter-based ChaCha8 generator identified by a 256-bit
//! key; child streams are derived by hashing (parent key, purpose tag,
//! index). Trials, population points and quadrature nodes each get their
//! own substream, so results do not depend on scheduling or worker count,
//! and are bit-identical across platforms.
//!
//! The distribution helpers (`below`, `unit_f64`, `poisson`, ...) are
//! implemented here rather than borrowed from a distributions crate so the
//! sampling layout is pinned by this crate alone.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

/// A seeded random stream with deterministic child derivation.
#[derive(Clone, Debug)]
pub struct Stream {
    key: [u8; 32],
    rng: ChaCha8Rng,
}

impl Stream {
    /// Root stream for a master seed.
    pub fn from_seed(seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"satclt.root");
        h.update(seed.to_le_bytes());
        Self::from_key(h.finalize().into())
    }

    fn from_key(key: [u8; 32]) -> Self {
        Stream {
            key,
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    /// Derive an independent child stream from a purpose tag and an index.
    ///
    /// Children of distinct `(tag, index)` pairs never collide, and the
    /// derivation does not advance or depend on the parent's position.
    pub fn child(&self, tag: &str, index: u64) -> Self {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update([0x1f]);
        h.update(tag.as_bytes());
        h.update([0x1f]);
        h.update(index.to_le_bytes());
        Self::from_key(h.finalize().into())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `{0, 1, ..., n-1}`, unbiased (Lemire rejection).
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    /// Uniform sign, `+1` or `-1`.
    pub fn sign(&mut self) -> i8 {
        if self.next_u64() & 1 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn bool(&mut self) -> bool {
        self.next_u64() & 1 == 0
    }

    /// Poisson sample by Knuth's product-of-uniforms method.
    ///
    /// Intended for the small means used throughout (lambda <= ~4).
    pub fn poisson(&mut self, lambda: f64) -> u64 {
        debug_assert!(lambda >= 0.0 && lambda < 30.0);
        if lambda == 0.0 {
            return 0;
        }
        let limit = (-lambda).exp();
        let mut k = 0u64;
        let mut p = 1.0f64;
        loop {
            p *= self.unit_f64();
            if p <= limit {
                return k;
            }
            k += 1;
        }
    }

    /// Standard normal via Box-Muller (two uniforms per sample).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.unit_f64(); // in (0, 1]
        let u2 = self.unit_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            xs.swap(i, j);
        }
    }
}
