//! Reproducible random numbers.
//!
//! All randomness in the crate flows through [`Rng`], a thin wrapper over
//! the ChaCha8 stream cipher generator. ChaCha8 is counter-based: a
//! generator is fully described by `(seed, stream, word position)`, so any
//! implementation of ChaCha8 can reproduce the draws.
//!
//! Derivations on top of the raw `u64` stream are fixed here so that they
//! can be re-implemented elsewhere:
//!
//! - the 64-bit seed is expanded to 32 key bytes with `rand_core`'s
//!   `seed_from_u64` (PCG32 expansion);
//! - `uniform()` = `(next_u64 >> 11) · 2⁻⁵³`, in `[0, 1)`;
//! - `below(n)` = `floor(uniform() · n)`;
//! - `normal()` uses Box–Muller on two uniforms, `u1` mapped to `(0, 1]`;
//! - `shuffle` is Fisher–Yates from the last index down, swapping `i` with
//!   `below(i + 1)`;
//! - substreams (per epoch, per sample, per purpose) keep the seed and set
//!   the ChaCha stream id to [`mix_tags`] of the tag list.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// SplitMix64 finaliser, used to fold substream tags into a stream id.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a tag list into a ChaCha stream id: `h = 0; h = mix64(h ^ tag)`.
pub fn mix_tags(tags: &[u64]) -> u64 {
    tags.iter().fold(0u64, |h, &t| mix64(h ^ t))
}

/// Snapshot of a generator position, for checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
    pub word_pos: u128,
}

#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent generator for `(seed, tags...)`.
    pub fn substream(seed: u64, tags: &[u64]) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(mix_tags(tags));
        Self { seed, inner }
    }

    pub fn state(&self) -> RngState {
        RngState {
            seed: self.seed,
            stream: self.inner.get_stream(),
            word_pos: self.inner.get_word_pos(),
        }
    }

    pub fn from_state(state: RngState) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(state.seed);
        inner.set_stream(state.stream);
        inner.set_word_pos(state.word_pos);
        Self {
            seed: state.seed,
            inner,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n.saturating_sub(1))
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
