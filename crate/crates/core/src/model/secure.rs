//! The forward pass over secret shares. Weights, tokens and the prompt are
//! all shared; only the random-feature parameters are public.

use crate::attention::{sec_rfa, sec_softmax_attention, SecureAttentionInput};
use crate::error::Result;
use crate::model::{check_tokens, AttentionKind, LayerWeights, Model, ModelConfig, PromptBlock, Weights};
use crate::protocols::{
    add_const, mul_const, sec_add, sec_inv_sqrt, sec_matmul, sec_mul, sec_relu, sec_square, sec_sub,
};
use crate::ring::FixedPointConfig;
use crate::runtime::{CostPlan, Provisioning, Role, Session, SessionSeeds};
use crate::share::Shared;
use crate::tensor::RingTensor;

/// Variance floor inside layer norm, large enough to keep the inverse square
/// root in its accurate range.
pub const LN_EPSILON: f64 = 1e-2;

/// Secret-shared weights.
pub type SecretWeights = Weights<Shared>;

impl SecretWeights {
    /// `owner` (the dealer or the data owner) shares every tensor. Dealer
    /// shares travel offline.
    pub fn share(session: &mut Session, model: &Model, owner: Role) -> Result<Self> {
        let cfg = *session.cfg();
        model.weights.try_map(|_, t| session.share_from(owner, &RingTensor::encode_matrix(&cfg, t)?))
    }

    fn zeros(cfg: &ModelConfig) -> Result<Self> {
        let flat = crate::model::weight_shapes(cfg)
            .into_iter()
            .map(|(r, c)| Shared::public(RingTensor::zeros(&[r, c])))
            .collect();
        Self::from_flat(flat, cfg.layers)
    }
}

/// The data owner shares tokens as one-hot rows (`n × vocab`), so the
/// embedding lookup is a secret matrix product.
pub fn share_tokens(session: &mut Session, cfg: &ModelConfig, tokens: &[usize]) -> Result<Shared> {
    check_tokens(cfg, tokens, 0)?;
    let one = session.cfg().encode(1.0)?.0;
    let onehot =
        RingTensor::from_fn(
            &[tokens.len(), cfg.vocab],
            |i| {
                if i % cfg.vocab == tokens[i / cfg.vocab] {
                    one
                } else {
                    0
                }
            },
        );
    session.client_share(&onehot)
}

/// The data owner shares a prompt block (fresh randomness on every call).
pub fn share_prompt(session: &mut Session, prompt: &PromptBlock) -> Result<Shared> {
    let cfg = *session.cfg();
    session.client_share(&RingTensor::encode_matrix(&cfg, &prompt.p)?)
}

/// Row-wise `(x − mean)·isqrt(var + ε)·gain + bias`.
pub fn layernorm_secure(session: &mut Session, x: &Shared, gain: &Shared, bias: &Shared) -> Result<Shared> {
    let cfg = *session.cfg();
    let (n, d) = x.dims2();
    let mean = mul_const(session, &x.sum_rows(&cfg), 1.0 / d as f64)?;
    let centred = sec_sub(session, x, &mean.broadcast_cols(d))?;
    let sq = sec_square(session, &centred)?;
    let var = mul_const(session, &sq.sum_rows(&cfg), 1.0 / d as f64)?;
    let r = sec_inv_sqrt(session, &add_const(session, &var, LN_EPSILON)?)?;
    let normed = sec_mul(session, &centred, &r.broadcast_cols(d))?;
    let scaled = sec_mul(session, &normed, &gain.broadcast_rows(n))?;
    sec_add(session, &scaled, &bias.broadcast_rows(n))
}

fn affine(session: &mut Session, x: &Shared, w: &Shared, b: &Shared) -> Result<Shared> {
    let y = sec_matmul(session, x, w)?;
    sec_add(session, &y, &b.broadcast_rows(x.dims2().0))
}

fn attention_block(
    session: &mut Session,
    model: &Model,
    l: usize,
    layer: &LayerWeights<Shared>,
    x: &Shared,
) -> Result<Shared> {
    let cfg = &model.cfg;
    let (d, dh) = (cfg.d_model, cfg.d_head());
    let qkv = affine(session, x, &layer.w_qkv, &layer.b_qkv)?;
    let mut heads = Vec::with_capacity(cfg.heads);
    for h in 0..cfg.heads {
        let inp = SecureAttentionInput::new(
            qkv.slice_cols(h * dh, dh)?,
            qkv.slice_cols(d + h * dh, dh)?,
            qkv.slice_cols(2 * d + h * dh, dh)?,
        )?;
        heads.push(match cfg.attention {
            AttentionKind::Softmax => sec_softmax_attention(session, &inp)?,
            AttentionKind::Rfa => sec_rfa(session, &inp, &model.features[l][h])?,
        });
    }
    affine(session, &Shared::concat_cols(&heads)?, &layer.w_o, &layer.b_o)
}

/// Logit shares (`1 × classes`) for one sequence given as one-hot token
/// shares and prompt shares. Mirrors [`crate::model::forward_plain`] step
/// for step.
pub fn forward_secure(
    session: &mut Session,
    model: &Model,
    w: &SecretWeights,
    tokens: &Shared,
    prompt: &Shared,
) -> Result<Shared> {
    let cfg = *session.cfg();
    let (n, _) = tokens.dims2();
    let (n_p, _) = prompt.dims2();
    check_tokens(&model.cfg, &vec![0; n], n_p)?;
    let emb = sec_matmul(session, tokens, &w.embedding)?;
    let mut x = Shared::concat_rows(&[prompt.clone(), emb])?;
    x = sec_add(session, &x, &w.position.slice_rows(0, n_p + n)?)?;
    for (l, layer) in w.layers.iter().enumerate() {
        let a = attention_block(session, model, l, layer, &x)?;
        x = layernorm_secure(session, &sec_add(session, &x, &a)?, &layer.ln1_gain, &layer.ln1_bias)?;
        let pre = affine(session, &x, &layer.w_ff1, &layer.b_ff1)?;
        let hidden = sec_relu(session, &pre)?;
        let f = affine(session, &hidden, &layer.w_ff2, &layer.b_ff2)?;
        x = layernorm_secure(session, &sec_add(session, &x, &f)?, &layer.ln2_gain, &layer.ln2_bias)?;
    }
    let pooled = mul_const(session, &x.slice_rows(n_p, n)?.sum_cols(&cfg), 1.0 / n as f64)?;
    affine(session, &pooled, &w.head.transpose()?, &w.head_bias)
}

/// Correlated randomness one forward pass over `n` tokens and `n_p` prompt
/// rows consumes. Protocols are data-oblivious, so a dry run on zero shares
/// in a scratch session records exactly the requests of a real run.
pub fn plan_forward(model: &Model, cfg: FixedPointConfig, n: usize, n_p: usize) -> Result<CostPlan> {
    let mut scratch = Session::open(cfg, SessionSeeds::from_master(0));
    scratch.set_provisioning(Provisioning::Record);
    let w = SecretWeights::zeros(&model.cfg)?;
    let tokens = Shared::public(RingTensor::zeros(&[n, model.cfg.vocab]));
    let prompt = Shared::public(RingTensor::zeros(&[n_p, model.cfg.d_model]));
    forward_secure(&mut scratch, model, &w, &tokens, &prompt)?;
    Ok(scratch.recorded_plan())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward_plain, layernorm_plain};
    use crate::runtime::Phase;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn session(seed: u64) -> Session {
        Session::open(FixedPointConfig::default(), SessionSeeds::from_master(seed))
    }

    fn row(session: &mut Session, v: &[f64]) -> Shared {
        let cfg = *session.cfg();
        session.client_share(&RingTensor::encode_slice(&cfg, &[1, v.len()], v).unwrap()).unwrap()
    }

    #[test]
    fn layernorm_constant_row_gives_bias() {
        let mut s = session(1);
        let bias: Vec<f64> = (0..8).map(|i| i as f64 * 0.1 - 0.3).collect();
        let x = row(&mut s, &[1.5; 8]);
        let g = row(&mut s, &[1.0; 8]);
        let b = row(&mut s, &bias);
        let y = layernorm_secure(&mut s, &x, &g, &b).unwrap().reveal_f64(s.cfg());
        for (a, e) in y.iter().zip(&bias) {
            assert!((a - e).abs() < 2e-2);
        }
    }

    #[test]
    fn layernorm_matches_plain() {
        let mut s = session(2);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let x = DMatrix::from_fn(16, 32, |_, _| rng.random_range(-3.0..3.0));
        let g = DMatrix::from_fn(1, 32, |_, _| rng.random_range(0.5..1.5));
        let b = DMatrix::from_fn(1, 32, |_, _| rng.random_range(-0.5..0.5));
        let cfg = *s.cfg();
        let xs = s.client_share(&RingTensor::encode_matrix(&cfg, &x).unwrap()).unwrap();
        let gs = s.client_share(&RingTensor::encode_matrix(&cfg, &g).unwrap()).unwrap();
        let bs = s.client_share(&RingTensor::encode_matrix(&cfg, &b).unwrap()).unwrap();
        let y = layernorm_secure(&mut s, &xs, &gs, &bs).unwrap().reveal_matrix(&cfg);
        let expect = layernorm_plain(&x, &g, &b);
        assert!((&y - &expect).abs().max() < 3e-2);
    }

    #[test]
    fn layernorm_unit_gain_row_mean_is_bias_mean() {
        let mut s = session(3);
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let b: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bias_mean = b.iter().sum::<f64>() / 16.0;
        let g = row(&mut s, &[1.0; 16]);
        let bs = row(&mut s, &b);
        for _ in 0..5 {
            let v: Vec<f64> = (0..16).map(|_| rng.random_range(-4.0..4.0)).collect();
            let x = row(&mut s, &v);
            let y = layernorm_secure(&mut s, &x, &g, &bs).unwrap().reveal_f64(s.cfg());
            assert!((y.iter().sum::<f64>() / 16.0 - bias_mean).abs() < 2e-2);
        }
    }

    fn random_tokens(rng: &mut ChaCha20Rng, n: usize, vocab: usize) -> Vec<usize> {
        (0..n).map(|_| rng.random_range(0..vocab)).collect()
    }

    fn secure_logits(model: &Model, tokens: &[usize], prompt: &PromptBlock, seed: u64) -> (Vec<f64>, Session) {
        let mut s = session(seed);
        let w = SecretWeights::share(&mut s, model, Role::Dealer).unwrap();
        let plan = plan_forward(model, *s.cfg(), tokens.len(), prompt.n_p()).unwrap();
        s.provision(&plan).unwrap();
        let t = share_tokens(&mut s, &model.cfg, tokens).unwrap();
        let p = share_prompt(&mut s, prompt).unwrap();
        let y = forward_secure(&mut s, model, &w, &t, &p).unwrap();
        assert_eq!(s.remaining(), 0);
        (y.reveal_f64(s.cfg()), s)
    }

    #[test]
    fn secure_forward_matches_plain_both_kinds() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for kind in [AttentionKind::Rfa, AttentionKind::Softmax] {
            let model = Model::build(ModelConfig { attention: kind, ..ModelConfig::default() }, 21).unwrap();
            for trial in 0..3 {
                let tokens = random_tokens(&mut rng, 8, 16);
                let flat: Vec<f64> = (0..4 * 32).map(|_| rng.random_range(-1.0..1.0)).collect();
                let prompt = PromptBlock::from_flat(&flat, 4, 32).unwrap();
                let plain = forward_plain(&model, &tokens, &prompt).unwrap();
                let (sec, _) = secure_logits(&model, &tokens, &prompt, trial);
                let gap = plain.iter().zip(&sec).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(gap < 5e-2, "{kind:?} gap {gap}: {plain:?} vs {sec:?}");
            }
        }
    }

    #[test]
    fn strict_mode_reports_shortfall() {
        let model = Model::build(ModelConfig::default(), 2).unwrap();
        let mut s = session(4);
        let w = SecretWeights::share(&mut s, &model, Role::Dealer).unwrap();
        let mut plan = plan_forward(&model, *s.cfg(), 4, 2).unwrap();
        plan.requests.pop();
        s.provision(&plan).unwrap();
        let t = share_tokens(&mut s, &model.cfg, &[1, 2, 3, 4]).unwrap();
        let p = share_prompt(&mut s, &PromptBlock::zeros(2, 32)).unwrap();
        let err = forward_secure(&mut s, &model, &w, &t, &p).unwrap_err();
        assert!(matches!(err, crate::Error::Shortfall { .. }), "{err}");
    }

    #[test]
    fn weights_shared_by_dealer_stay_offline() {
        let model = Model::build(ModelConfig::default(), 2).unwrap();
        let mut s = session(5);
        SecretWeights::share(&mut s, &model, Role::Dealer).unwrap();
        assert_eq!(s.ledger().online_bytes(), 0);
        assert!(s.ledger().bytes(Phase::Offline) > 0);
    }
}
