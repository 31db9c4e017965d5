//! Seedable, portable random stream used everywhere in the crate.
//!
//! All randomness flows through [`RandomStream`], a thin wrapper over the
//! counter-based ChaCha8 generator. Uniform doubles are produced by the
//! standard 53-bit construction so the stream of values is fixed by the seed
//! alone, independent of platform or of the `rand` ecosystem's conventions.

use std::collections::VecDeque;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A deterministic stream of random draws.
///
/// Streams are forked with [`RandomStream::split`]: the child is seeded from
/// the parent's next `u64`, so a fixed root seed yields a fixed tree of
/// streams regardless of how the children are consumed (or on which thread).
#[derive(Debug, Clone)]
pub struct RandomStream {
    inner: Inner,
}

#[derive(Debug, Clone)]
enum Inner {
    ChaCha(Box<ChaCha8Rng>),
    /// Replays a fixed script of uniform draws; for tests that need to force
    /// specific branch choices ("the Bernoulli succeeds", "tau = 0.98", ...).
    Scripted(VecDeque<f64>),
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        RandomStream {
            inner: Inner::ChaCha(Box::new(ChaCha8Rng::seed_from_u64(seed))),
        }
    }

    /// A stream that replays `draws` as its uniform outputs, then panics.
    pub fn from_script(draws: impl Into<Vec<f64>>) -> Self {
        RandomStream {
            inner: Inner::Scripted(draws.into().into()),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        match &mut self.inner {
            Inner::ChaCha(rng) => rng.next_u64(),
            Inner::Scripted(_) => panic!("scripted RandomStream cannot produce raw u64 draws"),
        }
    }

    /// Uniform draw on `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        match &mut self.inner {
            Inner::ChaCha(rng) => (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64),
            Inner::Scripted(q) => q.pop_front().expect("scripted RandomStream exhausted"),
        }
    }

    /// Uniform draw on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Uniform index in `0..n`. `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_f64() * n as f64) as usize).min(n - 1)
    }

    /// Zero-mean normal draw with the given standard deviation (Box-Muller).
    pub fn normal(&mut self, std_dev: f64) -> f64 {
        // 1 - u keeps the argument of ln strictly positive.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        std_dev * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fork an independent child stream, advancing this one by one draw.
    pub fn split(&mut self) -> RandomStream {
        RandomStream::new(self.next_u64())
    }

    /// Pre-draw `n` seeds for independent child streams (e.g. one per
    /// Monte Carlo task), so the tasks can run in any order or in parallel
    /// while remaining deterministic.
    pub fn child_seeds(&mut self, n: usize) -> Vec<u64> {
        (0..n).map(|_| self.next_u64()).collect()
    }
}
