//! Softmax attention and random feature attention, in plaintext and over shares.

pub mod plain;
pub mod secure;

pub use plain::{
    normalize_rows, phi_features, phi_features_unnormalized, rfa_ref, rfa_ref_with, softmax_attention_ref,
    softmax_attention_ref_scaled, softmax_ref, AttentionInput, RfaParams, RFA_EPSILON,
};
pub use secure::{
    sec_div_rows, sec_normalize_rows, sec_phi_features, sec_rfa, sec_softmax_attention, sec_softmax_attention_scaled,
    SecureAttentionInput, DIV_DENOMINATOR_SCALE,
};

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}
