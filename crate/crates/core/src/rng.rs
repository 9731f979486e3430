//! Seeded randomness for simulation runs.
//!
//! Every random decision in the models goes through the [`Entropy`] trait, which
//! exposes only two primitives: a fair coin and a uniform index. The production
//! generator is [`SimRng`], a ChaCha8 stream seeded from a 64-bit integer. ChaCha8
//! output is specified independently of the host platform, and uniform indices are
//! drawn on `u64` so the draw sequence does not depend on pointer width.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Source of the random decisions taken by the simulation.
pub trait Entropy {
    /// A fair coin flip.
    fn coin(&mut self) -> bool;

    /// A uniform draw from `0..n`. `n` must be at least 1.
    fn below(&mut self, n: usize) -> usize;

    /// Uniform in-place permutation (Fisher-Yates, drawing from the back).
    fn shuffle<T>(&mut self, items: &mut [T])
    where
        Self: Sized,
    {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// Picks one element of a nonempty slice. Draws nothing for singletons.
    fn pick<T: Copy>(&mut self, items: &[T]) -> T
    where
        Self: Sized,
    {
        assert!(!items.is_empty(), "pick from empty slice");
        if items.len() == 1 {
            items[0]
        } else {
            items[self.below(items.len())]
        }
    }
}

impl<E: Entropy + ?Sized> Entropy for &mut E {
    fn coin(&mut self) -> bool {
        (**self).coin()
    }

    fn below(&mut self, n: usize) -> usize {
        (**self).below(n)
    }
}

/// The simulation generator: ChaCha8 seeded through `seed_from_u64`.
#[derive(Debug, Clone)]
pub struct SimRng {
    inner: ChaCha8Rng,
    seed: u64,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
            seed,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Raw 64-bit output, used for deriving sub-seeds.
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}

impl Entropy for SimRng {
    fn coin(&mut self) -> bool {
        self.inner.next_u64() >> 63 == 1
    }

    fn below(&mut self, n: usize) -> usize {
        assert!(n >= 1, "below(0)");
        self.inner.random_range(0..n as u64) as usize
    }
}

/// Replays a fixed script of raw draws, cycling when it runs out.
///
/// `below(n)` consumes one value and returns it modulo `n`; `coin` consumes one
/// value and returns its lowest bit. Meant for tests that pin tie-break sequences.
#[derive(Debug, Clone)]
pub struct ScriptedEntropy {
    script: Vec<u64>,
    pos: usize,
    draws: usize,
}

impl ScriptedEntropy {
    pub fn new(script: Vec<u64>) -> Self {
        assert!(!script.is_empty(), "empty entropy script");
        Self {
            script,
            pos: 0,
            draws: 0,
        }
    }

    /// Number of values consumed so far.
    pub fn draws(&self) -> usize {
        self.draws
    }

    fn next(&mut self) -> u64 {
        let v = self.script[self.pos];
        self.pos = (self.pos + 1) % self.script.len();
        self.draws += 1;
        v
    }
}

impl Entropy for ScriptedEntropy {
    fn coin(&mut self) -> bool {
        self.next() & 1 == 1
    }

    fn below(&mut self, n: usize) -> usize {
        assert!(n >= 1, "below(0)");
        (self.next() % n as u64) as usize
    }
}

/// SplitMix64 output function. A bijection on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `index` in a batch rooted at `base`.
///
/// `mix64(base + (index + 1) * GOLDEN_GAMMA)`: the counter step is odd, so distinct
/// indices give distinct pre-images, and `mix64` is a bijection, so derived seeds
/// within a batch never collide. Extending a batch leaves earlier seeds unchanged.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    mix64(base.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}
