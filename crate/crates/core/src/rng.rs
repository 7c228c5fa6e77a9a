//! Deterministic, splittable random streams.
//!
//! Each stream is a ChaCha8 keystream: a seed selects the key and a 64-bit
//! stream id selects an independent counter sequence, so output depends only
//! on (seed, stream, number of draws) and never on platform or scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RngStream {
            seed,
            stream,
            inner,
        }
    }

    /// Independent child stream `k` of `seed`.
    pub fn split(seed: u64, k: u64) -> Self {
        Self::with_stream(seed, k)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }
}

/// Index drawn with probability ∝ `weights[i]`; entries below `floor` are
/// never selected. `None` when nothing is above the floor.
pub(crate) fn sample_index(weights: &[f64], floor: f64, u: f64) -> Option<usize> {
    let total: f64 = weights.iter().filter(|&&w| w >= floor).sum();
    if !(total > 0.0) {
        return None;
    }
    let target = u * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if w < floor {
            continue;
        }
        acc += w;
        last = Some(i);
        if target < acc {
            return Some(i);
        }
    }
    last
}
