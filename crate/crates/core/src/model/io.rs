//! Weight files and token files.
//!
//! A weight directory holds `manifest.json` (config, seed and one entry per
//! tensor) and `weights.bin`, the tensors back to back in ring serialisation.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{weight_shapes, Model, ModelConfig, ModelWeights, Weights};
use crate::ring::FixedPointConfig;
use crate::tensor::RingTensor;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    offset: usize,
    len: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    config: ModelConfig,
    seed: u64,
    tensors: Vec<TensorEntry>,
}

fn dtype(cfg: &FixedPointConfig) -> String {
    format!("fixed{}.{}", cfg.ell(), cfg.frac_bits())
}

/// Writes the model's weights in fixed point. `seed` is stored so loaders
/// regenerate the same random-feature parameters.
pub fn save_weights(dir: &Path, model: &Model, seed: u64, cfg: &FixedPointConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut blob = Vec::new();
    let mut tensors = Vec::new();
    for (name, t) in model.weights.named() {
        let offset = blob.len();
        RingTensor::encode_matrix(cfg, t)?.write_to(&mut blob);
        tensors.push(TensorEntry {
            name,
            shape: vec![t.nrows(), t.ncols()],
            dtype: dtype(cfg),
            offset,
            len: blob.len() - offset,
        });
    }
    let manifest = Manifest { config: model.cfg.clone(), seed, tensors };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    fs::write(dir.join("weights.bin"), blob)?;
    Ok(())
}

/// Reads a directory written by [`save_weights`].
pub fn load_weights(dir: &Path, cfg: &FixedPointConfig) -> Result<Model> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let blob = fs::read(dir.join("weights.bin"))?;
    manifest.config.validate()?;
    let template = Weights::from_flat(weight_shapes(&manifest.config), manifest.config.layers)?;
    let names: Vec<String> = template.named().into_iter().map(|(n, _)| n).collect();
    if names.len() != manifest.tensors.len() {
        return Err(Error::Parse(format!(
            "manifest lists {} tensors, expected {}",
            manifest.tensors.len(),
            names.len()
        )));
    }
    let mut flat = Vec::with_capacity(names.len());
    for (entry, name) in manifest.tensors.iter().zip(&names) {
        if &entry.name != name {
            return Err(Error::Parse(format!("expected tensor {name}, found {}", entry.name)));
        }
        if entry.dtype != dtype(cfg) {
            return Err(Error::Parse(format!("tensor {name} has dtype {}, expected {}", entry.dtype, dtype(cfg))));
        }
        let bytes = blob
            .get(entry.offset..entry.offset + entry.len)
            .ok_or_else(|| Error::Parse(format!("tensor {name} lies outside weights.bin")))?;
        let t = RingTensor::from_bytes(bytes)?;
        if t.shape() != entry.shape.as_slice() {
            return Err(Error::ShapeMismatch { expected: entry.shape.clone(), actual: t.shape().to_vec() });
        }
        flat.push(t.decode_matrix(cfg));
    }
    let weights: ModelWeights = Weights::from_flat(flat, manifest.config.layers)?;
    Model::from_weights(manifest.config, weights, manifest.seed)
}

/// Whitespace-separated token ids, one sequence per non-empty line.
pub fn parse_tokens(text: &str) -> Result<Vec<Vec<usize>>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Parse(format!("line {}: bad token id {t:?}", i + 1))))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_round_trip_at_fixed_point_precision() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = FixedPointConfig::default();
        let model = Model::build(ModelConfig::default(), 12).unwrap();
        save_weights(dir.path(), &model, 12, &cfg).unwrap();
        let back = load_weights(dir.path(), &cfg).unwrap();
        assert_eq!(back.cfg, model.cfg);
        assert_eq!(back.features, model.features);
        for ((_, a), (_, b)) in model.weights.named().into_iter().zip(back.weights.named()) {
            assert!((a - b).abs().max() <= 0.5 / cfg.scale());
        }
    }

    #[test]
    fn corrupted_manifest_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = FixedPointConfig::default();
        let model = Model::build(ModelConfig::default(), 1).unwrap();
        save_weights(dir.path(), &model, 1, &cfg).unwrap();
        let m = fs::read_to_string(dir.path().join("manifest.json")).unwrap().replace("layer0.w_o", "layer0.w_x");
        fs::write(dir.path().join("manifest.json"), m).unwrap();
        assert!(load_weights(dir.path(), &cfg).is_err());
    }

    #[test]
    fn token_lines() {
        assert_eq!(parse_tokens("1 2 3\n\n 4  5\n").unwrap(), vec![vec![1, 2, 3], vec![4, 5]]);
        assert!(parse_tokens("1 x").is_err());
    }
}
