//! Communication of secure softmax attention against secure RFA as the
//! sequence grows.

use serde::{Deserialize, Serialize};

use crate::attention::{
    fit_slope, normalize_rows, rfa_ref, sec_rfa, sec_softmax_attention_scaled, softmax_attention_ref_scaled,
    AttentionInput, RfaParams, SecureAttentionInput,
};
use crate::bench::{timed_row, BenchRow, BenchmarkReport};
use crate::error::{Error, Result};
use crate::model::AttentionKind;
use crate::ring::FixedPointConfig;
use crate::runtime::{Phase, Session, SessionSeeds};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttentionBenchConfig {
    #[serde(default = "default_ns")]
    pub n: Vec<usize>,
    #[serde(default = "default_kinds")]
    pub kinds: Vec<AttentionKind>,
    #[serde(rename = "M", default = "default_m")]
    pub m: usize,
    #[serde(default = "default_d_head")]
    pub d_head: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub measure_compute: bool,
}

fn default_ns() -> Vec<usize> {
    vec![64, 128, 256, 512]
}
fn default_kinds() -> Vec<AttentionKind> {
    vec![AttentionKind::Softmax, AttentionKind::Rfa]
}
fn default_m() -> usize {
    256
}
fn default_d_head() -> usize {
    16
}
fn default_sigma() -> f64 {
    1.0
}

impl Default for AttentionBenchConfig {
    fn default() -> Self {
        Self {
            n: default_ns(),
            kinds: default_kinds(),
            m: default_m(),
            d_head: default_d_head(),
            sigma: default_sigma(),
            seed: 0,
            measure_compute: false,
        }
    }
}

impl AttentionBenchConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Name of the fitted log-log byte exponent for `kind` in report metrics.
pub fn exponent_metric(kind: AttentionKind) -> String {
    format!("{}_bytes_exponent", kind_label(kind))
}

fn kind_label(kind: AttentionKind) -> &'static str {
    match kind {
        AttentionKind::Softmax => "softmax",
        AttentionKind::Rfa => "rfa",
    }
}

/// One secure attention call on unit-norm queries and keys. Only the
/// attention itself is measured; sharing the inputs is excluded.
pub fn bench_attention(kind: AttentionKind, n: usize, cfg: &AttentionBenchConfig) -> Result<BenchRow> {
    let raw = AttentionInput::random(n, cfg.d_head, cfg.seed.wrapping_add(n as u64));
    let inp = AttentionInput::new(normalize_rows(&raw.q), normalize_rows(&raw.k), raw.v)?;
    let mut s = Session::open(FixedPointConfig::default(), SessionSeeds::from_master(cfg.seed));
    s.set_phase(Phase::Input);
    let shared = SecureAttentionInput::share(&mut s, &inp)?;
    s.set_phase(Phase::Forward);
    let before = s.ledger().clone();
    let temperature = 1.0 / (cfg.sigma * cfg.sigma);
    let (out, want) = match kind {
        AttentionKind::Softmax => (
            sec_softmax_attention_scaled(&mut s, &shared, temperature)?,
            softmax_attention_ref_scaled(&inp, temperature),
        ),
        AttentionKind::Rfa => {
            let params = RfaParams::sample(cfg.d_head, cfg.m, cfg.sigma, cfg.seed)?;
            (sec_rfa(&mut s, &shared, &params)?, rfa_ref(&inp, &params)?)
        }
    };
    let delta = s.ledger().delta_since(&before);
    let err = (out.reveal_matrix(s.cfg()) - want).abs().max();
    Ok(BenchRow::from_ledger(kind_label(kind), n, &delta, err, cfg.seed))
}

/// Every kind at every length, plus per-kind byte exponents when at least
/// two lengths were measured.
pub fn cmd_bench_attention(cfg: &AttentionBenchConfig) -> Result<BenchmarkReport> {
    if cfg.n.is_empty() || cfg.kinds.is_empty() {
        return Err(Error::Empty("attention benchmark grid"));
    }
    let mut report = BenchmarkReport::default();
    for &kind in &cfg.kinds {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &n in &cfg.n {
            let row = timed_row(cfg.measure_compute, || bench_attention(kind, n, cfg))?;
            xs.push((n as f64).ln());
            ys.push((row.bytes_per_party as f64).ln());
            report.rows.push(row);
        }
        if xs.len() >= 2 {
            report.metrics.insert(exponent_metric(kind), fit_slope(&xs, &ys));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grid_has_expected_shape() {
        let cfg = AttentionBenchConfig { n: vec![8, 16, 32], m: 32, ..Default::default() };
        let r = cmd_bench_attention(&cfg).unwrap();
        assert_eq!(r.rows.len(), 6);
        let soft = r.metrics["softmax_bytes_exponent"];
        let rfa = r.metrics["rfa_bytes_exponent"];
        assert!(soft > rfa, "{soft} vs {rfa}");
        assert!(rfa < 1.2, "{rfa}");
        for row in &r.rows {
            assert!(row.max_error < 5e-2, "{} n={}: {}", row.operation, row.size, row.max_error);
        }
    }

    #[test]
    fn config_parses_and_rejects_unknown_keys() {
        let c = AttentionBenchConfig::from_toml("n = [4, 8]\nM = 16\nkinds = [\"rfa\"]").unwrap();
        assert_eq!((c.n.len(), c.m, c.kinds.len()), (2, 16, 1));
        assert!(AttentionBenchConfig::from_toml("bogus = 1").is_err());
        assert!(cmd_bench_attention(&AttentionBenchConfig { n: vec![], ..Default::default() }).is_err());
    }
}
