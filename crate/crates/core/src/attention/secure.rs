//! Attention over secret shares: the softmax baseline and masked-cosine RFA.

use crate::attention::plain::{RfaParams, RFA_EPSILON};
use crate::error::{Error, Result};
use crate::protocols::{
    add_const, add_public, matmul_public, mul_const, mul_int, sec_add, sec_compare_raw, sec_cosine, sec_exp,
    sec_inv_sqrt_steps, sec_matmul, sec_max_rows, sec_mul, sec_mul_raw, sec_reciprocal, sec_square, sec_sub,
    InvSqrtInit,
};
use crate::runtime::Session;
use crate::share::Shared;
use crate::tensor::RingTensor;

/// Secret queries, keys and values (`n × d_head` each).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecureAttentionInput {
    pub q: Shared,
    pub k: Shared,
    pub v: Shared,
}

impl SecureAttentionInput {
    pub fn new(q: Shared, k: Shared, v: Shared) -> Result<Self> {
        if q.shape() != k.shape() || q.shape() != v.shape() || q.shape().len() != 2 {
            return Err(Error::ShapeMismatch {
                expected: q.shape().to_vec(),
                actual: if q.shape() != k.shape() { k.shape().to_vec() } else { v.shape().to_vec() },
            });
        }
        Ok(Self { q, k, v })
    }

    /// The client shares a plaintext triple.
    pub fn share(session: &mut Session, inp: &crate::attention::AttentionInput) -> Result<Self> {
        let cfg = *session.cfg();
        let q = session.client_share(&RingTensor::encode_matrix(&cfg, &inp.q)?)?;
        let k = session.client_share(&RingTensor::encode_matrix(&cfg, &inp.k)?)?;
        let v = session.client_share(&RingTensor::encode_matrix(&cfg, &inp.v)?)?;
        Ok(Self { q, k, v })
    }

    pub fn n(&self) -> usize {
        self.q.dims2().0
    }

    pub fn d_head(&self) -> usize {
        self.q.dims2().1
    }
}

/// `Softmax(QKᵀ·scale)V`: max-stabilised exponentials, one reciprocal per
/// row. Communication grows with `n²`.
pub fn sec_softmax_attention_scaled(session: &mut Session, inp: &SecureAttentionInput, scale: f64) -> Result<Shared> {
    let (n, d) = inp.q.dims2();
    let scores = sec_matmul(session, &inp.q, &inp.k.transpose()?)?;
    let scores = mul_const(session, &scores, scale)?;
    let tau = sec_max_rows(session, &scores)?;
    let shifted = sec_sub(session, &scores, &tau.broadcast_cols(n))?;
    let e = sec_exp(session, &shifted)?;
    let denom = sec_reciprocal(session, &e.sum_rows(session.cfg()))?;
    let weighted = sec_matmul(session, &e, &inp.v)?;
    sec_mul(session, &weighted, &denom.broadcast_cols(d))
}

pub fn sec_softmax_attention(session: &mut Session, inp: &SecureAttentionInput) -> Result<Shared> {
    let d = inp.d_head() as f64;
    sec_softmax_attention_scaled(session, inp, 1.0 / d.sqrt())
}

/// Newton steps used when normalising rows. Three more than the plain
/// inverse square root: row mean squares in a model span roughly
/// `[0.02, 50]`, and from below the initializer gains only about 1.5× per
/// step until it is close.
pub const NORMALIZE_STEPS: usize = 6;

/// Scales each row to unit length: `x · isqrt(mean(x²)) / √d`. Rows should
/// have a mean square within the inverse square root's domain.
pub fn sec_normalize_rows(session: &mut Session, x: &Shared) -> Result<Shared> {
    let (_, d) = x.dims2();
    let sq = sec_square(session, x)?;
    let ms = mul_const(session, &sq.sum_rows(session.cfg()), 1.0 / d as f64)?;
    let r = sec_inv_sqrt_steps(session, &ms, InvSqrtInit::default(), NORMALIZE_STEPS)?;
    let r = mul_const(session, &r, 1.0 / (d as f64).sqrt())?;
    sec_mul(session, x, &r.broadcast_cols(d))
}

/// `√(2/M)·cos(XWᵀ + b)` for secret rows `X`. `W` and `b` are public, so the
/// projection is local; the cosines cost one round.
pub fn sec_phi_features(session: &mut Session, x: &Shared, params: &RfaParams) -> Result<Shared> {
    let cfg = *session.cfg();
    let (rows, d) = x.dims2();
    if d != params.d_head() {
        return Err(Error::ShapeMismatch { expected: vec![rows, params.d_head()], actual: vec![rows, d] });
    }
    let m = params.m();
    let wt = RingTensor::encode_matrix(&cfg, &params.w.transpose())?;
    let b = RingTensor::encode_slice(&cfg, &[1, m], &params.b)?.broadcast_rows(rows);
    let proj = add_public(session, &matmul_public(session, x, &wt)?, &b)?;
    let c = sec_cosine(session, &proj)?;
    mul_const(session, &c, (2.0 / m as f64).sqrt())
}

/// Random feature attention over shares.
///
/// Queries and keys are normalised together, mapped to features with one
/// cosine round, and the key-side accumulators `mean φ(k)⊗v` and
/// `mean φ(k)` come out of a single Beaver product against `[V | 1]`. A
/// second product yields numerators and denominators. The guard adds `ε` to
/// each denominator and `ε·mean(V)` to each numerator, and the ratio uses a
/// sign-aware reciprocal since random-feature denominators can dip below
/// zero. Communication is linear in `n`.
pub fn sec_rfa(session: &mut Session, inp: &SecureAttentionInput, params: &RfaParams) -> Result<Shared> {
    let cfg = *session.cfg();
    let (n, d) = inp.q.dims2();
    let qk = Shared::concat_rows(&[inp.q.clone(), inp.k.clone()])?;
    let unit = sec_normalize_rows(session, &qk)?;
    let phi = sec_phi_features(session, &unit, params)?;
    let phi_q = phi.slice_rows(0, n)?;
    let phi_k = phi.slice_rows(n, n)?;

    let ones = Shared::public(RingTensor::filled(&[n, 1], cfg.encode(1.0)?.0));
    let v1 = Shared::concat_cols(&[inp.v.clone(), ones])?;
    let acc = sec_matmul(session, &phi_k.transpose()?, &v1)?;
    let acc = mul_const(session, &acc, 1.0 / n as f64)?;

    let out = sec_matmul(session, &phi_q, &acc)?;
    let v_mean = mul_const(session, &inp.v.sum_cols(&cfg), RFA_EPSILON / n as f64)?;
    let num = sec_add(session, &out.slice_cols(0, d)?, &v_mean.broadcast_rows(n))?;
    let den = add_const(session, &out.slice_cols(d, 1)?, RFA_EPSILON)?;
    sec_div_rows(session, &num, &den)
}

/// Public factor applied to `|den|` before the reciprocal and taken back
/// out after it. Random-feature denominators satisfy `|den| ≤ 2` and often
/// fall below the reciprocal's working range (`x ≳ 0.05`); scaled, they
/// sit inside it for `|den| ∈ [8e-4, 9]`. Both multiplications are local.
pub const DIV_DENOMINATOR_SCALE: i64 = 64;

/// Divides each row of `num` by the matching entry of the column `den`,
/// whatever its sign: `|den|` goes through the reciprocal and the sign is
/// folded into the numerator in the same round. Requires
/// `|den| · DIV_DENOMINATOR_SCALE` below the reciprocal's upper limit (~600).
pub fn sec_div_rows(session: &mut Session, num: &Shared, den: &Shared) -> Result<Shared> {
    let (_, d) = num.dims2();
    let neg = sec_compare_raw(session, den, &Shared::public(RingTensor::zeros(den.shape())))?;
    let both = Shared::concat_cols(&[den.clone(), num.clone()])?;
    let flipped = sec_mul_raw(session, &neg.broadcast_cols(d + 1), &both)?;
    let fixed = sec_sub(session, &both, &mul_int(session, &flipped, 2))?;
    let scaled = mul_int(session, &fixed.slice_cols(0, 1)?, DIV_DENOMINATOR_SCALE);
    let r = sec_reciprocal(session, &scaled)?;
    let r = mul_int(session, &r, DIV_DENOMINATOR_SCALE);
    sec_mul(session, &fixed.slice_cols(1, d)?, &r.broadcast_cols(d))
}
