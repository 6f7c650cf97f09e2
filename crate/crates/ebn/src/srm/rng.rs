//! Reproducible random streams.
//!
//! Every stochastic computation draws from a stream derived as
//! hash(base_seed, stream_index) feeding a counter-based generator
//! (ChaCha), so results depend only on the (seed, index) pair and never
//! on execution order or thread count.

use crate::dist::normal::phi_inv;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// SplitMix64-style finalizer used to derive stream keys.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives the seed for stream `index` of `base_seed`.
pub fn derive_seed(base_seed: u64, index: u64) -> u64 {
    mix(mix(base_seed) ^ mix(index.wrapping_mul(0xa24baed4963ee407)))
}

/// A seeded generator over one derived stream.
pub struct CountingRng {
    inner: ChaCha12Rng,
}

impl CountingRng {
    pub fn new(base_seed: u64, stream: u64) -> Self {
        CountingRng {
            inner: ChaCha12Rng::seed_from_u64(derive_seed(base_seed, stream)),
        }
    }

    /// Uniform draw in the open interval (0, 1).
    pub fn open_unit(&mut self) -> f64 {
        // 53 random bits shifted into (0,1); the +0.5 offset excludes 0.
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
    }

    /// Standard normal draw via the inverse CDF, exact in the tails.
    pub fn standard_normal(&mut self) -> f64 {
        phi_inv(self.open_unit())
    }

    /// Categorical draw; the final index absorbs rounding remainder.
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        let u = self.open_unit();
        let mut acc = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            acc += p;
            if u <= acc {
                return i;
            }
        }
        probs.len() - 1
    }
}
