use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::ring::FixedPointConfig;

/// Keyed counter-mode PRF over ChaCha20.
///
/// Output word `i` is word pair `2i` of the ChaCha20 keystream, so any
/// `(key, counter)` pair always yields the same element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrfKey {
    key: [u8; 32],
    counter: u64,
}

impl PrfKey {
    pub fn new(key: [u8; 32]) -> Self {
        Self { key, counter: 0 }
    }

    /// Derives a key from a seed and a domain-separation label.
    pub fn derive(seed: u64, label: &str) -> Self {
        let mut h = Sha256::new();
        h.update(label.as_bytes());
        h.update([0u8]);
        h.update(seed.to_le_bytes());
        let key: [u8; 32] = h.finalize().into();
        Self::new(key)
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn key(&self) -> &[u8; 32] {
        &self.key
    }

    /// Next `n` pseudo-random words, advancing the counter by `n`.
    pub fn expand_words(&mut self, n: usize) -> Vec<u64> {
        if n == 0 {
            return Vec::new();
        }
        let next = self.counter.checked_add(n as u64).expect("PRF counter space exhausted for this key");
        let mut stream = ChaCha20Rng::from_seed(self.key);
        stream.set_word_pos(self.counter as u128 * 2);
        self.counter = next;
        (0..n).map(|_| stream.next_u64()).collect()
    }

    /// Next `n` pseudo-random ring elements.
    pub fn expand(&mut self, n: usize, cfg: &FixedPointConfig) -> Vec<u64> {
        let mask = cfg.mask();
        let mut out = self.expand_words(n);
        out.iter_mut().for_each(|v| *v &= mask);
        out
    }
}
