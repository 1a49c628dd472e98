//! Plaintext forward pass; the reference for the secure one.

use nalgebra::DMatrix;

use crate::attention::{rfa_ref_with, softmax_attention_ref, AttentionInput, RFA_EPSILON};
use crate::error::Result;
use crate::model::secure::LN_EPSILON;
use crate::model::{check_tokens, AttentionKind, LayerWeights, Model, PromptBlock};

/// Row-wise `(x − mean)/√(var + ε)·gain + bias`, with the same `ε` as the
/// secure layer norm.
pub fn layernorm_plain(x: &DMatrix<f64>, gain: &DMatrix<f64>, bias: &DMatrix<f64>) -> DMatrix<f64> {
    let d = x.ncols() as f64;
    let mut out = x.clone();
    for mut row in out.row_iter_mut() {
        let mean = row.sum() / d;
        row.add_scalar_mut(-mean);
        let var = row.norm_squared() / d;
        row /= (var + LN_EPSILON).sqrt();
        row.component_mul_assign(gain);
        row += bias;
    }
    out
}

fn add_row(x: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for mut row in out.row_iter_mut() {
        row += b;
    }
    out
}

fn attention_block(
    model: &Model,
    l: usize,
    layer: &LayerWeights<DMatrix<f64>>,
    x: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let cfg = &model.cfg;
    let (d, dh) = (cfg.d_model, cfg.d_head());
    let qkv = add_row(&(x * &layer.w_qkv), &layer.b_qkv);
    let n = x.nrows();
    let mut heads = DMatrix::zeros(n, d);
    for h in 0..cfg.heads {
        let inp = AttentionInput::new(
            qkv.columns(h * dh, dh).into_owned(),
            qkv.columns(d + h * dh, dh).into_owned(),
            qkv.columns(2 * d + h * dh, dh).into_owned(),
        )?;
        let out = match cfg.attention {
            AttentionKind::Softmax => softmax_attention_ref(&inp),
            AttentionKind::Rfa => rfa_ref_with(&inp, &model.features[l][h], RFA_EPSILON)?,
        };
        heads.columns_mut(h * dh, dh).copy_from(&out);
    }
    Ok(add_row(&(heads * &layer.w_o), &layer.b_o))
}

/// The sequence after embedding and prompt prepending: `(n_p + n) × d_model`.
pub fn embed(model: &Model, tokens: &[usize], prompt: &PromptBlock) -> Result<DMatrix<f64>> {
    let n_p = prompt.n_p();
    check_tokens(&model.cfg, tokens, n_p)?;
    let w = &model.weights;
    let len = n_p + tokens.len();
    let mut x = DMatrix::zeros(len, model.cfg.d_model);
    x.rows_mut(0, n_p).copy_from(&prompt.p);
    for (i, &t) in tokens.iter().enumerate() {
        x.row_mut(n_p + i).copy_from(&w.embedding.row(t));
    }
    Ok(x + w.position.rows(0, len))
}

/// Hidden states after all encoder layers.
pub fn encode(model: &Model, tokens: &[usize], prompt: &PromptBlock) -> Result<DMatrix<f64>> {
    let mut x = embed(model, tokens, prompt)?;
    for (l, layer) in model.weights.layers.iter().enumerate() {
        let a = attention_block(model, l, layer, &x)?;
        x = layernorm_plain(&(x + a), &layer.ln1_gain, &layer.ln1_bias);
        let hidden = add_row(&(&x * &layer.w_ff1), &layer.b_ff1).map(|v| v.max(0.0));
        let f = add_row(&(hidden * &layer.w_ff2), &layer.b_ff2);
        x = layernorm_plain(&(x + f), &layer.ln2_gain, &layer.ln2_bias);
    }
    Ok(x)
}

/// Class logits: encoder, mean over the non-prompt positions, classifier head.
pub fn forward_plain(model: &Model, tokens: &[usize], prompt: &PromptBlock) -> Result<Vec<f64>> {
    let x = encode(model, tokens, prompt)?;
    let n_p = prompt.n_p();
    let pooled = x.rows(n_p, tokens.len()).row_mean();
    let logits = &model.weights.head * pooled.transpose() + model.weights.head_bias.transpose();
    Ok(logits.iter().copied().collect())
}
