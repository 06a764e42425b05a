use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a random draw is for. Each purpose gets its own ChaCha stream so
/// that adding draws of one kind never shifts another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Slowdown = 1,
    Coin = 2,
    Inject = 3,
    InjectClass = 4,
    Setup = 5,
}

/// Counter-based randomness: every draw is addressed by
/// (seed, purpose, step, key) and is independent of iteration order.
///
/// The ChaCha stream id carries purpose and step; the word position
/// carries the key, two 32-bit words per key.
#[derive(Debug, Clone)]
pub struct KeyedStreams {
    base: ChaCha8Rng,
}

impl KeyedStreams {
    pub fn new(seed: u64) -> Self {
        KeyedStreams {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn stream(purpose: Purpose, step: u64) -> u64 {
        debug_assert!(step < 1 << 56);
        ((purpose as u64) << 56) | step
    }

    /// Generator positioned at `key` within the (purpose, step) stream.
    pub fn rng(&self, purpose: Purpose, step: u64, key: u32) -> ChaCha8Rng {
        let mut r = self.base.clone();
        r.set_stream(Self::stream(purpose, step));
        r.set_word_pos(key as u128 * 2);
        r
    }

    /// One uniform u64 per key in `keys`, in key order.
    pub fn fill(&self, purpose: Purpose, step: u64, keys: std::ops::Range<u32>, out: &mut Vec<u64>) {
        out.clear();
        if keys.is_empty() {
            return;
        }
        let mut r = self.rng(purpose, step, keys.start);
        out.extend(keys.map(|_| r.next_u64()));
    }

    /// Generator for one-off setup work (placement, class assignment).
    pub fn setup(&self) -> ChaCha8Rng {
        self.rng(Purpose::Setup, 0, 0)
    }
}

/// Bernoulli trial from a uniform u64.
pub fn bernoulli(bits: u64, p: f64) -> bool {
    ((bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)) < p
}
