//! A small transformer encoder with prepended prompt embeddings, runnable in
//! plaintext and over secret shares.

pub mod io;
pub mod plain;
pub mod secure;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::attention::RfaParams;
use crate::error::{Error, Result};

pub use io::{load_weights, parse_tokens, save_weights};
pub use plain::{forward_plain, layernorm_plain};
pub use secure::{
    forward_secure, layernorm_secure, plan_forward, share_prompt, share_tokens, SecretWeights, LN_EPSILON,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionKind {
    Softmax,
    Rfa,
}

impl AttentionKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "softmax" => Some(Self::Softmax),
            "rfa" => Some(Self::Rfa),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub layers: usize,
    pub d_model: usize,
    pub heads: usize,
    pub d_ff: usize,
    pub vocab: usize,
    pub n_max: usize,
    pub classes: usize,
    pub attention: AttentionKind,
    #[serde(default)]
    pub activation: Activation,
    /// Random features per head (RFA only).
    pub features: usize,
    pub sigma: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            d_model: 32,
            heads: 2,
            d_ff: 64,
            vocab: 16,
            n_max: 16,
            classes: 2,
            attention: AttentionKind::Rfa,
            activation: Activation::Relu,
            features: 64,
            sigma: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.layers == 0 || self.d_model == 0 || self.heads == 0 || self.d_ff == 0 || self.n_max == 0 {
            return bad("layers, d_model, heads, d_ff and n_max must be positive".into());
        }
        if self.d_model % self.heads != 0 {
            return bad(format!("d_model {} is not divisible by {} heads", self.d_model, self.heads));
        }
        if self.vocab < 2 {
            return bad(format!("vocab must be at least 2, got {}", self.vocab));
        }
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.attention == AttentionKind::Rfa && (self.features == 0 || !(self.sigma > 0.0)) {
            return bad("RFA needs features ≥ 1 and sigma > 0".into());
        }
        Ok(())
    }

    pub fn d_head(&self) -> usize {
        self.d_model / self.heads
    }
}

/// Weights of one encoder layer. `w_qkv` packs the query, key and value
/// projections side by side.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerWeights<T> {
    pub w_qkv: T,
    pub b_qkv: T,
    pub w_o: T,
    pub b_o: T,
    pub ln1_gain: T,
    pub ln1_bias: T,
    pub w_ff1: T,
    pub b_ff1: T,
    pub w_ff2: T,
    pub b_ff2: T,
    pub ln2_gain: T,
    pub ln2_bias: T,
}

const LAYER_TENSORS: [&str; 12] = [
    "w_qkv", "b_qkv", "w_o", "b_o", "ln1_gain", "ln1_bias", "w_ff1", "b_ff1", "w_ff2", "b_ff2", "ln2_gain", "ln2_bias",
];

impl<T> LayerWeights<T> {
    fn tensors(&self) -> [&T; 12] {
        [
            &self.w_qkv,
            &self.b_qkv,
            &self.w_o,
            &self.b_o,
            &self.ln1_gain,
            &self.ln1_bias,
            &self.w_ff1,
            &self.b_ff1,
            &self.w_ff2,
            &self.b_ff2,
            &self.ln2_gain,
            &self.ln2_bias,
        ]
    }

    fn from_iter(mut it: impl Iterator<Item = T>) -> Option<Self> {
        Some(Self {
            w_qkv: it.next()?,
            b_qkv: it.next()?,
            w_o: it.next()?,
            b_o: it.next()?,
            ln1_gain: it.next()?,
            ln1_bias: it.next()?,
            w_ff1: it.next()?,
            b_ff1: it.next()?,
            w_ff2: it.next()?,
            b_ff2: it.next()?,
            ln2_gain: it.next()?,
            ln2_bias: it.next()?,
        })
    }
}

/// All model tensors. Biases and gains are `1 × k` rows; the classifier
/// head is `classes × d_model`.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights<T> {
    pub embedding: T,
    pub position: T,
    pub layers: Vec<LayerWeights<T>>,
    pub head: T,
    pub head_bias: T,
}

impl<T> Weights<T> {
    /// Every tensor with its stable name, in serialisation order.
    pub fn named(&self) -> Vec<(String, &T)> {
        let mut out = vec![("embedding".to_string(), &self.embedding), ("position".to_string(), &self.position)];
        for (l, layer) in self.layers.iter().enumerate() {
            for (name, t) in LAYER_TENSORS.iter().zip(layer.tensors()) {
                out.push((format!("layer{l}.{name}"), t));
            }
        }
        out.push(("head".to_string(), &self.head));
        out.push(("head_bias".to_string(), &self.head_bias));
        out
    }

    /// Applies `f` to every tensor in `named()` order.
    pub fn try_map<U>(&self, mut f: impl FnMut(&str, &T) -> Result<U>) -> Result<Weights<U>> {
        let mapped = self.named().into_iter().map(|(n, t)| f(&n, t)).collect::<Result<Vec<U>>>()?;
        Weights::from_flat(mapped, self.layers.len())
    }

    /// Rebuilds from tensors in `named()` order.
    pub fn from_flat(flat: Vec<T>, layers: usize) -> Result<Self> {
        let expected = 4 + 12 * layers;
        if flat.len() != expected {
            return Err(Error::ShapeMismatch { expected: vec![expected], actual: vec![flat.len()] });
        }
        let mut it = flat.into_iter();
        let embedding = it.next().expect("length checked");
        let position = it.next().expect("length checked");
        let layers = (0..layers).map(|_| LayerWeights::from_iter(&mut it).expect("length checked")).collect();
        let head = it.next().expect("length checked");
        let head_bias = it.next().expect("length checked");
        Ok(Self { embedding, position, layers, head, head_bias })
    }
}

/// Plaintext weights.
pub type ModelWeights = Weights<DMatrix<f64>>;

/// Expected `(rows, cols)` of every tensor, in `named()` order.
pub fn weight_shapes(cfg: &ModelConfig) -> Vec<(usize, usize)> {
    let d = cfg.d_model;
    let mut out = vec![(cfg.vocab, d), (cfg.n_max, d)];
    for _ in 0..cfg.layers {
        out.extend([(d, 3 * d), (1, 3 * d), (d, d), (1, d), (1, d), (1, d), (d, cfg.d_ff), (1, cfg.d_ff)]);
        out.extend([(cfg.d_ff, d), (1, d), (1, d), (1, d)]);
    }
    out.push((cfg.classes, d));
    out.push((1, cfg.classes));
    out
}

impl ModelWeights {
    pub fn check(&self, cfg: &ModelConfig) -> Result<()> {
        if self.layers.len() != cfg.layers {
            return Err(Error::ShapeMismatch { expected: vec![cfg.layers], actual: vec![self.layers.len()] });
        }
        for ((_, t), (r, c)) in self.named().into_iter().zip(weight_shapes(cfg)) {
            if t.shape() != (r, c) {
                return Err(Error::ShapeMismatch { expected: vec![r, c], actual: vec![t.nrows(), t.ncols()] });
            }
        }
        Ok(())
    }
}

/// Standard deviation of token embeddings; positions use half. Kept at the
/// scale of typical projected prompt entries so prompts and tokens compete
/// on equal terms inside attention.
pub const EMBEDDING_STD: f64 = 0.25;

/// Deterministic initialisation: Gaussian matrices scaled by `1/√fan_in`,
/// small embeddings and biases, unit layer-norm gains.
pub fn build_model(cfg: &ModelConfig, seed: u64) -> Result<ModelWeights> {
    cfg.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut gauss = |r: usize, c: usize, std: f64| {
        let n = Normal::new(0.0, std).expect("positive std");
        DMatrix::from_fn(r, c, |_, _| n.sample(&mut rng))
    };
    let d = cfg.d_model;
    let inv = |k: usize| 1.0 / (k as f64).sqrt();
    let embedding = gauss(cfg.vocab, d, EMBEDDING_STD);
    let position = gauss(cfg.n_max, d, EMBEDDING_STD / 2.0);
    let layers = (0..cfg.layers)
        .map(|_| LayerWeights {
            w_qkv: gauss(d, 3 * d, inv(d)),
            b_qkv: gauss(1, 3 * d, 0.02),
            w_o: gauss(d, d, inv(d)),
            b_o: gauss(1, d, 0.02),
            ln1_gain: DMatrix::from_element(1, d, 1.0),
            ln1_bias: DMatrix::zeros(1, d),
            w_ff1: gauss(d, cfg.d_ff, inv(d)),
            b_ff1: gauss(1, cfg.d_ff, 0.02),
            w_ff2: gauss(cfg.d_ff, d, inv(cfg.d_ff)),
            b_ff2: gauss(1, d, 0.02),
            ln2_gain: DMatrix::from_element(1, d, 1.0),
            ln2_bias: DMatrix::zeros(1, d),
        })
        .collect();
    let head = gauss(cfg.classes, d, inv(d));
    let head_bias = DMatrix::zeros(1, cfg.classes);
    Ok(Weights { embedding, position, layers, head, head_bias })
}

/// Public random-feature parameters for every `(layer, head)`, derived from
/// the model seed.
pub fn rfa_params(cfg: &ModelConfig, seed: u64) -> Result<Vec<Vec<RfaParams>>> {
    (0..cfg.layers)
        .map(|l| {
            (0..cfg.heads).map(|h| RfaParams::for_head(cfg.d_head(), cfg.features, cfg.sigma, seed, l, h)).collect()
        })
        .collect()
}

/// A frozen model: configuration, weights and the public feature parameters.
#[derive(Clone, Debug)]
pub struct Model {
    pub cfg: ModelConfig,
    pub weights: ModelWeights,
    pub features: Vec<Vec<RfaParams>>,
}

impl Model {
    pub fn build(cfg: ModelConfig, seed: u64) -> Result<Self> {
        let weights = build_model(&cfg, seed)?;
        let features = rfa_params(&cfg, seed)?;
        Ok(Self { cfg, weights, features })
    }

    pub fn from_weights(cfg: ModelConfig, weights: ModelWeights, seed: u64) -> Result<Self> {
        cfg.validate()?;
        weights.check(&cfg)?;
        let features = rfa_params(&cfg, seed)?;
        Ok(Self { cfg, weights, features })
    }
}

/// `n_p` prompt embeddings prepended to every input sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct PromptBlock {
    pub p: DMatrix<f64>,
}

impl PromptBlock {
    pub fn zeros(n_p: usize, d_model: usize) -> Self {
        Self { p: DMatrix::zeros(n_p, d_model) }
    }

    /// Reshapes a flat `n_p·d_model` vector row by row.
    pub fn from_flat(flat: &[f64], n_p: usize, d_model: usize) -> Result<Self> {
        if flat.len() != n_p * d_model {
            return Err(Error::ShapeMismatch { expected: vec![n_p * d_model], actual: vec![flat.len()] });
        }
        Ok(Self { p: DMatrix::from_row_slice(n_p, d_model, flat) })
    }

    pub fn n_p(&self) -> usize {
        self.p.nrows()
    }
}

pub(crate) fn check_tokens(cfg: &ModelConfig, tokens: &[usize], n_p: usize) -> Result<()> {
    if tokens.is_empty() {
        return Err(Error::Empty("token sequence"));
    }
    if let Some(&t) = tokens.iter().find(|&&t| t >= cfg.vocab) {
        return Err(Error::OutOfBounds { what: "token id", index: t, limit: cfg.vocab });
    }
    if tokens.len() + n_p > cfg.n_max {
        return Err(Error::OutOfBounds { what: "sequence length", index: tokens.len() + n_p, limit: cfg.n_max });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_weights() {
        let cfg = ModelConfig::default();
        assert_eq!(build_model(&cfg, 7).unwrap(), build_model(&cfg, 7).unwrap());
        assert_ne!(build_model(&cfg, 7).unwrap(), build_model(&cfg, 8).unwrap());
    }

    #[test]
    fn shapes_match_config() {
        let cfg = ModelConfig { layers: 3, d_ff: 48, classes: 4, ..ModelConfig::default() };
        let w = build_model(&cfg, 1).unwrap();
        w.check(&cfg).unwrap();
        assert_eq!(w.named().len(), 4 + 12 * 3);
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig { heads: 3, ..ModelConfig::default() }.validate().is_err());
        assert!(ModelConfig { vocab: 1, ..ModelConfig::default() }.validate().is_err());
        assert!(ModelConfig::default().validate().is_ok());
    }

    #[test]
    fn flat_round_trip() {
        let cfg = ModelConfig::default();
        let w = build_model(&cfg, 3).unwrap();
        let back = w.try_map(|_, t| Ok(t.clone())).unwrap();
        assert_eq!(w, back);
    }

    #[test]
    fn prompt_reshape() {
        let p = PromptBlock::from_flat(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 2, 3).unwrap();
        assert_eq!(p.p[(1, 0)], 4.0);
        assert!(PromptBlock::from_flat(&[1.0], 2, 3).is_err());
    }
}
