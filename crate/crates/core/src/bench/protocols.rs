//! Microbenchmarks of the building-block protocols.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::bench::{timed_row, BenchRow, BenchmarkReport};
use crate::error::{Error, Result};
use crate::protocols::*;
use crate::ring::FixedPointConfig;
use crate::runtime::{Phase, Session, SessionSeeds};
use crate::share::Shared;
use crate::tensor::RingTensor;

pub const PROTOCOL_OPS: [&str; 14] = [
    "share",
    "mul",
    "matmul",
    "compare",
    "max",
    "exp",
    "reciprocal",
    "inv_sqrt",
    "sqrt",
    "div",
    "relu",
    "cosine",
    "sine",
    "truncate",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolBenchConfig {
    /// Elements per call (matrix side for `matmul`).
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_ops")]
    pub ops: Vec<String>,
    #[serde(default = "default_ell")]
    pub ell: u32,
    #[serde(default = "default_frac")]
    pub frac_bits: u32,
    #[serde(default)]
    pub seed: u64,
    /// Record local wall time in `compute_s` (breaks bit-exact reruns).
    #[serde(default)]
    pub measure_compute: bool,
}

fn default_sizes() -> Vec<usize> {
    vec![1, 256]
}
fn default_ops() -> Vec<String> {
    PROTOCOL_OPS.iter().map(|s| s.to_string()).collect()
}
fn default_ell() -> u32 {
    64
}
fn default_frac() -> u32 {
    16
}

impl Default for ProtocolBenchConfig {
    fn default() -> Self {
        Self { sizes: default_sizes(), ops: default_ops(), ell: 64, frac_bits: 16, seed: 0, measure_compute: false }
    }
}

impl ProtocolBenchConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn uniform(rng: &mut ChaCha20Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn max_err(got: &[f64], want: &[f64]) -> f64 {
    got.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Runs one operation on `size` random in-domain inputs and measures the
/// online traffic of the protocol itself (input sharing excluded). Iterative
/// kernels are scored against their plaintext iteration, the rest against
/// the exact function.
pub fn bench_op(op: &str, size: usize, cfg: FixedPointConfig, seed: u64) -> Result<BenchRow> {
    if size == 0 {
        return Err(Error::Empty("benchmark size"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ (size as u64) << 20);
    let mut s = Session::open(cfg, SessionSeeds::from_master(seed));
    s.set_phase(Phase::Input);
    let input = |s: &mut Session, v: &[f64], shape: &[usize]| -> Result<Shared> {
        let t = RingTensor::encode_slice(&cfg, shape, v)?;
        s.client_share(&t)
    };
    let n = size;

    // `share` measures the input phase itself.
    if op == "share" {
        let v = uniform(&mut rng, n, -8.0, 8.0);
        let before = s.ledger().clone();
        let x = input(&mut s, &v, &[n])?;
        let err = max_err(&x.reveal_f64(&cfg), &v);
        let delta = s.ledger().delta_since(&before);
        return Ok(BenchRow::from_ledger(op, n, &delta, err, seed));
    }

    type Run = Box<dyn FnOnce(&mut Session) -> Result<(Vec<f64>, Vec<f64>)>>;
    let run: Run = match op {
        "mul" => {
            let (a, b) = (uniform(&mut rng, n, -8.0, 8.0), uniform(&mut rng, n, -8.0, 8.0));
            let (x, y) = (input(&mut s, &a, &[n])?, input(&mut s, &b, &[n])?);
            let want = a.iter().zip(&b).map(|(p, q)| p * q).collect();
            Box::new(move |s| Ok((sec_mul(s, &x, &y)?.reveal_f64(s.cfg()), want)))
        }
        "matmul" => {
            let (a, b) = (uniform(&mut rng, n * n, -2.0, 2.0), uniform(&mut rng, n * n, -2.0, 2.0));
            let (x, y) = (input(&mut s, &a, &[n, n])?, input(&mut s, &b, &[n, n])?);
            let am = nalgebra::DMatrix::from_row_slice(n, n, &a);
            let bm = nalgebra::DMatrix::from_row_slice(n, n, &b);
            let prod = am * bm;
            let want = (0..n * n).map(|i| prod[(i / n, i % n)]).collect();
            Box::new(move |s| Ok((sec_matmul(s, &x, &y)?.reveal_f64(s.cfg()), want)))
        }
        "compare" => {
            let (a, b) = (uniform(&mut rng, n, -8.0, 8.0), uniform(&mut rng, n, -8.0, 8.0));
            let (x, y) = (input(&mut s, &a, &[n])?, input(&mut s, &b, &[n])?);
            let want = a.iter().zip(&b).map(|(p, q)| f64::from(u8::from(p < q))).collect();
            Box::new(move |s| Ok((sec_compare(s, &x, &y)?.reveal_f64(s.cfg()), want)))
        }
        "max" => {
            let a = uniform(&mut rng, n, -8.0, 8.0);
            let x = input(&mut s, &a, &[n])?;
            let want = vec![a.iter().copied().fold(f64::MIN, f64::max)];
            Box::new(move |s| Ok((sec_max(s, &x)?.reveal_f64(s.cfg()), want)))
        }
        "truncate" => {
            let a = uniform(&mut rng, n, -8.0, 8.0);
            let x = input(&mut s, &a, &[n])?;
            let want = a.clone();
            Box::new(move |s| {
                let up = mul_int(s, &x, 1 << s.cfg().frac_bits());
                Ok((truncate(s, &up, s.cfg().frac_bits()).reveal_f64(s.cfg()), want))
            })
        }
        "div" => {
            let (a, b) = (uniform(&mut rng, n, -4.0, 4.0), uniform(&mut rng, n, 0.2, 8.0));
            let (x, y) = (input(&mut s, &a, &[n])?, input(&mut s, &b, &[n])?);
            let want = a.iter().zip(&b).map(|(p, q)| p / q).collect();
            Box::new(move |s| Ok((sec_div(s, &x, &y)?.reveal_f64(s.cfg()), want)))
        }
        "exp" | "reciprocal" | "inv_sqrt" | "sqrt" | "relu" | "cosine" | "sine" => {
            let (lo, hi, f, kernel): (f64, f64, fn(f64) -> f64, fn(&mut Session, &Shared) -> Result<Shared>) = match op
            {
                "exp" => (-4.0, 4.0, reference::exp_iter, sec_exp),
                "reciprocal" => (0.2, 8.0, reference::reciprocal_iter, sec_reciprocal),
                "inv_sqrt" => (0.1, 8.0, reference::inv_sqrt_iter, sec_inv_sqrt),
                "sqrt" => (0.1, 8.0, reference::sqrt_iter, sec_sqrt),
                "relu" => (-8.0, 8.0, |x| x.max(0.0), sec_relu),
                "cosine" => (-std::f64::consts::PI, std::f64::consts::PI, f64::cos, sec_cosine),
                _ => (-std::f64::consts::PI, std::f64::consts::PI, f64::sin, sec_sine),
            };
            let a = uniform(&mut rng, n, lo, hi);
            let x = input(&mut s, &a, &[n])?;
            let want = a.iter().map(|&v| f(v)).collect();
            Box::new(move |s| Ok((kernel(s, &x)?.reveal_f64(s.cfg()), want)))
        }
        other => return Err(Error::InvalidConfig(format!("unknown protocol `{other}`"))),
    };
    s.set_phase(Phase::Forward);
    let before = s.ledger().clone();
    let (got, want) = run(&mut s)?;
    let delta = s.ledger().delta_since(&before);
    Ok(BenchRow::from_ledger(op, n, &delta, max_err(&got, &want), seed))
}

/// Every configured operation at every configured size.
pub fn cmd_bench_protocols(cfg: &ProtocolBenchConfig) -> Result<BenchmarkReport> {
    let fixed = FixedPointConfig::new(cfg.ell, cfg.frac_bits)?;
    let mut report = BenchmarkReport::default();
    for op in &cfg.ops {
        for &size in &cfg.sizes {
            let size = if op == "matmul" { size.min(64) } else { size };
            report.rows.push(timed_row(cfg.measure_compute, || bench_op(op, size, fixed, cfg.seed))?);
        }
    }
    Ok(report)
}
