//! Seeded random source shared by every stochastic component.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Stream ids derived from one run seed.
pub(crate) const STREAM_SHUFFLE: u64 = 1;
pub(crate) const STREAM_EVOLUTION: u64 = 2;
pub(crate) const STREAM_INIT: u64 = 3;
pub(crate) const STREAM_NOISE: u64 = 4;
pub(crate) const STREAM_HINDSIGHT: u64 = 5;

/// Seeded ChaCha8 generator. Identical seed and stream id give a bit-identical
/// sample sequence on every platform.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent sequence for the same seed, one per consumer
    /// (stream shuffling, evolution map, model init, sampling noise).
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u128 {
        self.inner.get_word_pos()
    }

    pub fn stream(&self) -> u64 {
        self.inner.get_stream()
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn normals(&mut self, n: usize) -> alloc::vec::Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }

    /// Uniform on `[low, high)`.
    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.inner.random::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Fisher-Yates permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> alloc::vec::Vec<usize> {
        use rand::seq::SliceRandom;
        let mut idx: alloc::vec::Vec<usize> = (0..n).collect();
        idx.shuffle(&mut self.inner);
        idx
    }
}

/// Serialized as `(seed, stream, word position)`, enough to resume the sequence.
#[derive(Serialize, Deserialize)]
struct RngSnapshot {
    seed: u64,
    stream: u64,
    word_pos: u64,
}

impl Serialize for RngState {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        RngSnapshot {
            seed: self.seed,
            stream: self.stream(),
            word_pos: self.counter() as u64,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RngState {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let snap = RngSnapshot::deserialize(d)?;
        let mut rng = Self::with_stream(snap.seed, snap.stream);
        rng.inner.set_word_pos(u128::from(snap.word_pos));
        Ok(rng)
    }
}

impl PartialEq for RngState {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed && self.inner == other.inner
    }
}
