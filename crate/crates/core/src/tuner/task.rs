//! Labelled token sequences and the synthetic separable task.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub tokens: Vec<usize>,
    pub label: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dataset {
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// One example per line: `label<TAB>id id id ...`.
    pub fn parse(text: &str) -> Result<Self> {
        let examples = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                let (label, ids) =
                    l.split_once('\t').ok_or_else(|| Error::Parse(format!("line {}: missing tab", i + 1)))?;
                let label =
                    label.trim().parse().map_err(|_| Error::Parse(format!("line {}: bad label {label:?}", i + 1)))?;
                let tokens = ids
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| Error::Parse(format!("line {}: bad token id {t:?}", i + 1))))
                    .collect::<Result<Vec<usize>>>()?;
                if tokens.is_empty() {
                    return Err(Error::Parse(format!("line {}: no tokens", i + 1)));
                }
                Ok(Example { tokens, label })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { examples })
    }

    pub fn to_text(&self) -> String {
        self.examples
            .iter()
            .map(|e| {
                let ids: Vec<String> = e.tokens.iter().map(usize::to_string).collect();
                format!("{}\t{}\n", e.label, ids.join(" "))
            })
            .collect()
    }
}

/// Two classes over a vocabulary split in halves; every token of a class-`c`
/// sequence comes from half `c`. See [`synthetic_task_mixed`] for a noisier
/// variant. Classes alternate to stay balanced.
pub fn synthetic_task(vocab: usize, n: usize, count: usize, seed: u64) -> Result<Dataset> {
    synthetic_task_mixed(vocab, n, count, n, seed)
}

/// As [`synthetic_task`], but a class-`c` sequence takes between `min_own`
/// and `n` tokens from half `c` and the rest from the other half, shuffled.
/// With `min_own > n/2` the label is the majority half, so token counts still
/// separate the classes linearly, with a smaller margin.
pub fn synthetic_task_mixed(vocab: usize, n: usize, count: usize, min_own: usize, seed: u64) -> Result<Dataset> {
    if min_own <= n / 2 || min_own > n {
        return Err(Error::InvalidConfig(format!("min_own must lie in ({}, {n}], got {min_own}", n / 2)));
    }
    if vocab < 2 || n == 0 {
        return Err(Error::InvalidConfig(format!("synthetic task needs vocab ≥ 2 and n ≥ 1, got {vocab} / {n}")));
    }
    let half = vocab / 2;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let examples = (0..count)
        .map(|i| {
            let label = i % 2;
            let own = rng.random_range(min_own..=n);
            let mut tokens: Vec<usize> = (0..n)
                .map(|j| {
                    let from_own = j < own;
                    let side = if from_own { label } else { 1 - label };
                    if side == 0 {
                        rng.random_range(0..half)
                    } else {
                        rng.random_range(half..vocab)
                    }
                })
                .collect();
            tokens.shuffle(&mut rng);
            Example { tokens, label }
        })
        .collect();
    Ok(Dataset { examples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_follow_majority_half() {
        let ds = synthetic_task_mixed(16, 8, 64, 5, 3).unwrap();
        assert_eq!(ds.len(), 64);
        for e in &ds.examples {
            let high = e.tokens.iter().filter(|&&t| t >= 8).count();
            assert_eq!(e.label, usize::from(high > 4));
            assert!(e.tokens.iter().all(|&t| t < 16));
        }
        assert_eq!(ds.examples.iter().filter(|e| e.label == 1).count(), 32);
    }

    #[test]
    fn default_task_is_pure() {
        let ds = synthetic_task(16, 8, 10, 4).unwrap();
        for e in &ds.examples {
            assert!(e.tokens.iter().all(|&t| (t >= 8) == (e.label == 1)));
        }
        assert!(synthetic_task_mixed(16, 8, 4, 4, 1).is_err());
    }

    #[test]
    fn text_round_trip() {
        let ds = synthetic_task(16, 8, 5, 1).unwrap();
        assert_eq!(Dataset::parse(&ds.to_text()).unwrap(), ds);
        assert!(Dataset::parse("1 2 3").is_err());
        assert!(Dataset::parse("x\t1 2").is_err());
    }
}
