//! Plaintext attention: softmax, the random feature map and RFA.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Guard added to every RFA denominator in the secure path.
pub const RFA_EPSILON: f64 = 1.0 / 16384.0;

/// Public random-feature parameters, regenerated by both servers from a
/// common seed.
#[derive(Clone, Debug, PartialEq)]
pub struct RfaParams {
    /// `M × d_head`; row `i` is `ω_i ~ N(0, σ²I)`.
    pub w: DMatrix<f64>,
    /// `M` biases, uniform on `[0, 2π)`.
    pub b: Vec<f64>,
    pub sigma: f64,
    pub seed: u64,
}

impl RfaParams {
    pub fn sample(d_head: usize, m: usize, sigma: f64, seed: u64) -> Result<Self> {
        Self::sample_stream(d_head, m, sigma, seed, 0)
    }

    /// Independent parameters per `(layer, head)` under one seed.
    pub fn for_head(d_head: usize, m: usize, sigma: f64, seed: u64, layer: usize, head: usize) -> Result<Self> {
        Self::sample_stream(d_head, m, sigma, seed, ((layer as u64) << 32) | head as u64)
    }

    fn sample_stream(d_head: usize, m: usize, sigma: f64, seed: u64, stream: u64) -> Result<Self> {
        if m == 0 || d_head == 0 {
            return Err(Error::InvalidConfig(format!("random features need M ≥ 1 and d_head ≥ 1, got {m} / {d_head}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma must be positive, got {sigma}")));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let normal = Normal::new(0.0, sigma).expect("sigma checked");
        let w = DMatrix::from_fn(m, d_head, |_, _| normal.sample(&mut rng));
        let b = (0..m).map(|_| rng.random_range(0.0..TAU)).collect();
        Ok(Self { w, b, sigma, seed })
    }

    /// Feature count `M`.
    pub fn m(&self) -> usize {
        self.w.nrows()
    }

    pub fn d_head(&self) -> usize {
        self.w.ncols()
    }
}

/// Queries, keys and values, one row per position.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionInput {
    pub q: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl AttentionInput {
    pub fn new(q: DMatrix<f64>, k: DMatrix<f64>, v: DMatrix<f64>) -> Result<Self> {
        if q.shape() != k.shape() || q.shape() != v.shape() {
            return Err(Error::ShapeMismatch {
                expected: vec![q.nrows(), q.ncols()],
                actual: if q.shape() != k.shape() { vec![k.nrows(), k.ncols()] } else { vec![v.nrows(), v.ncols()] },
            });
        }
        Ok(Self { q, k, v })
    }

    /// Gaussian entries with the given seed.
    pub fn random(n: usize, d_head: usize, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut m = || DMatrix::from_fn(n, d_head, |_, _| normal.sample(&mut rng));
        let (q, k, v) = (m(), m(), m());
        Self { q, k, v }
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn d_head(&self) -> usize {
        self.q.ncols()
    }
}

/// Max-stabilised softmax.
pub fn softmax_ref(x: &[f64]) -> Vec<f64> {
    let tau = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - tau).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `Softmax(QKᵀ·scale)V`.
pub fn softmax_attention_ref_scaled(inp: &AttentionInput, scale: f64) -> DMatrix<f64> {
    let scores = &inp.q * inp.k.transpose() * scale;
    let mut p = DMatrix::zeros(scores.nrows(), scores.ncols());
    for i in 0..scores.nrows() {
        let row: Vec<f64> = scores.row(i).iter().copied().collect();
        for (j, v) in softmax_ref(&row).into_iter().enumerate() {
            p[(i, j)] = v;
        }
    }
    p * &inp.v
}

/// `Softmax(QKᵀ/√d)V`.
pub fn softmax_attention_ref(inp: &AttentionInput) -> DMatrix<f64> {
    softmax_attention_ref_scaled(inp, 1.0 / (inp.d_head() as f64).sqrt())
}

/// `√(2/M)·cos(Wx + b)`.
pub fn phi_features(x: &[f64], params: &RfaParams) -> Vec<f64> {
    let m = params.m();
    let scale = (2.0 / m as f64).sqrt();
    let wx = &params.w * DVector::from_column_slice(x);
    wx.iter().zip(&params.b).map(|(p, b)| scale * (p + b).cos()).collect()
}

/// Features scaled by `exp(σ²‖x‖²/2)`, whose inner products estimate the
/// dot-then-exponentiate kernel `exp(σ²·xᵀy)` (with ω ~ N(0, σ²I)).
pub fn phi_features_unnormalized(x: &[f64], params: &RfaParams) -> Vec<f64> {
    let sq: f64 = x.iter().map(|v| v * v).sum();
    let pre = (sq * params.sigma * params.sigma / 2.0).exp();
    phi_features(x, params).into_iter().map(|v| v * pre).collect()
}

/// Rows scaled to unit L2 norm (zero rows stay zero).
pub fn normalize_rows(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for mut row in out.row_iter_mut() {
        let n = row.norm();
        if n > 0.0 {
            row /= n;
        }
    }
    out
}

fn feature_matrix(x: &DMatrix<f64>, params: &RfaParams) -> DMatrix<f64> {
    let scale = (2.0 / params.m() as f64).sqrt();
    let mut proj = x * params.w.transpose();
    for mut row in proj.row_iter_mut() {
        for (v, b) in row.iter_mut().zip(&params.b) {
            *v = scale * (*v + b).cos();
        }
    }
    proj
}

/// RFA with a guard `eps`: `(num + eps·mean(V)) / (den + eps)`, which keeps
/// the single-key and identical-key cancellations exact. Queries and keys
/// are normalised to unit length first so the kernel prefactors cancel.
pub fn rfa_ref_with(inp: &AttentionInput, params: &RfaParams, eps: f64) -> Result<DMatrix<f64>> {
    if params.d_head() != inp.d_head() {
        return Err(Error::ShapeMismatch {
            expected: vec![params.m(), inp.d_head()],
            actual: vec![params.m(), params.d_head()],
        });
    }
    let n = inp.n() as f64;
    let phi_q = feature_matrix(&normalize_rows(&inp.q), params);
    let phi_k = feature_matrix(&normalize_rows(&inp.k), params);
    // Means rather than sums keep magnitudes independent of n; the ratio is unchanged.
    let s = phi_k.transpose() * &inp.v / n;
    let z = phi_k.row_sum().transpose() / n;
    let num = &phi_q * s;
    let den = &phi_q * z;
    let v_mean = inp.v.row_mean();
    Ok(DMatrix::from_fn(num.nrows(), num.ncols(), |i, j| (num[(i, j)] + eps * v_mean[j]) / (den[i] + eps)))
}

/// RFA without a denominator guard.
pub fn rfa_ref(inp: &AttentionInput, params: &RfaParams) -> Result<DMatrix<f64>> {
    rfa_ref_with(inp, params, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn softmax_examples() {
        assert!(close(&softmax_ref(&[0.0, 0.0]), &[0.5, 0.5], 1e-15));
        assert!(close(&softmax_ref(&[1000.0, 1000.0]), &[0.5, 0.5], 1e-15));
        assert!(close(&softmax_ref(&[0.0, 3f64.ln()]), &[0.25, 0.75], 1e-15));
    }

    #[test]
    fn softmax_rows_sum_to_one_and_shift() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x: Vec<f64> = (0..10).map(|_| rng.random_range(-50.0..50.0)).collect();
            let p = softmax_ref(&x);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            let c = rng.random_range(-100.0..100.0);
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            assert!(close(&softmax_ref(&shifted), &p, 1e-12));
        }
    }

    #[test]
    fn attention_degenerate_cases() {
        let one = AttentionInput::random(1, 4, 2);
        assert!((softmax_attention_ref(&one) - &one.v).abs().max() < 1e-15);

        let mut same = AttentionInput::random(5, 4, 3);
        let k0 = same.k.row(0).clone_owned();
        for mut r in same.k.row_iter_mut() {
            r.copy_from(&k0);
        }
        let mean = same.v.row_mean();
        let out = softmax_attention_ref(&same);
        for r in out.row_iter() {
            assert!((r - &mean).abs().max() < 1e-12);
        }
    }

    #[test]
    fn attention_matches_double_loop() {
        let inp = AttentionInput::random(4, 8, 4);
        let d = 8.0f64.sqrt();
        let out = softmax_attention_ref(&inp);
        for i in 0..4 {
            let mut w = [0.0; 4];
            for (j, wj) in w.iter_mut().enumerate() {
                let mut dot = 0.0;
                for c in 0..8 {
                    dot += inp.q[(i, c)] * inp.k[(j, c)];
                }
                *wj = (dot / d).exp();
            }
            let s: f64 = w.iter().sum();
            for c in 0..8 {
                let mut acc = 0.0;
                for j in 0..4 {
                    acc += w[j] / s * inp.v[(j, c)];
                }
                assert!((acc - out[(i, c)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn params_are_reproducible_and_in_range() {
        let a = RfaParams::sample(16, 64, 1.0, 9).unwrap();
        assert_eq!(a, RfaParams::sample(16, 64, 1.0, 9).unwrap());
        assert_ne!(a, RfaParams::for_head(16, 64, 1.0, 9, 0, 1).unwrap());
        assert_eq!(a.w.shape(), (64, 16));
        assert!(a.b.iter().all(|b| (0.0..TAU).contains(b)));
        assert!(RfaParams::sample(16, 0, 1.0, 9).is_err());
        assert!(RfaParams::sample(16, 4, 0.0, 9).is_err());
    }

    #[test]
    fn feature_shape_and_zero_input() {
        let p = RfaParams::sample(3, 17, 1.0, 5).unwrap();
        let f = phi_features(&[0.0; 3], &p);
        assert_eq!(f.len(), 17);
        let s = (2.0 / 17.0f64).sqrt();
        for (v, b) in f.iter().zip(&p.b) {
            assert!((v - s * b.cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn features_estimate_the_exponential_kernel() {
        let m = 100_000;
        let p = RfaParams::sample(4, m, 1.0, 11).unwrap();
        let x = [0.5, 0.5, 0.5, 0.5];
        let y = [0.5, -0.5, 0.5, 0.5];
        let fx = phi_features_unnormalized(&x, &p);
        let fy = phi_features_unnormalized(&y, &p);
        // Per-feature terms M·φ_i(x)φ_i(y) have mean exp(xᵀy); check within 3 standard errors.
        let terms: Vec<f64> = fx.iter().zip(&fy).map(|(a, b)| a * b * m as f64).collect();
        let mean = terms.iter().sum::<f64>() / m as f64;
        let var = terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        let se = (var / m as f64).sqrt();
        let dot: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        assert!((mean - dot.exp()).abs() < 3.0 * se, "mean {mean} vs {} (se {se})", dot.exp());
    }

    #[test]
    fn rfa_degenerate_cases() {
        let p = RfaParams::sample(4, 32, 1.0, 12).unwrap();
        let one = AttentionInput::random(1, 4, 13);
        assert!((rfa_ref(&one, &p).unwrap() - &one.v).abs().max() < 1e-12);

        let mut same = AttentionInput::random(6, 4, 14);
        let k0 = same.k.row(0).clone_owned();
        for mut r in same.k.row_iter_mut() {
            r.copy_from(&k0);
        }
        let mean = same.v.row_mean();
        for r in rfa_ref(&same, &p).unwrap().row_iter() {
            assert!((r - &mean).abs().max() < 1e-12);
        }
        assert!(rfa_ref(&AttentionInput::random(2, 5, 1), &p).is_err());
    }

    #[test]
    fn rfa_error_falls_with_feature_count() {
        let ms = [16usize, 64, 256, 1024];
        let mut mse = [0.0; 4];
        for seed in 0..20 {
            let raw = AttentionInput::random(32, 16, 100 + seed);
            let inp = AttentionInput::new(normalize_rows(&raw.q), normalize_rows(&raw.k), raw.v).unwrap();
            let exact = softmax_attention_ref_scaled(&inp, 1.0);
            for (i, &m) in ms.iter().enumerate() {
                let p = RfaParams::sample(16, m, 1.0, 1000 + seed).unwrap();
                let approx = rfa_ref(&inp, &p).unwrap();
                mse[i] += (approx - &exact).map(|v| v * v).mean() / 20.0;
            }
        }
        assert!(mse.windows(2).all(|w| w[1] < w[0]), "{mse:?}");
        let xs: Vec<f64> = ms.iter().map(|m| (*m as f64).ln()).collect();
        let ys: Vec<f64> = mse.iter().map(|v| v.ln()).collect();
        let slope = crate::attention::fit_slope(&xs, &ys);
        assert!(slope <= -0.7, "slope {slope}, mse {mse:?}");
    }
}
