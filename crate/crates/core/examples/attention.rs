//! Secure RFA next to the secure softmax baseline: accuracy and traffic.

use mpc_prompt::attention::*;
use mpc_prompt::ring::FixedPointConfig;
use mpc_prompt::runtime::{Phase, Session, SessionSeeds};

fn main() -> mpc_prompt::error::Result<()> {
    let cfg = FixedPointConfig::default();
    let params = RfaParams::sample(16, 256, 1.0, 9)?;
    for n in [16, 64, 256] {
        let raw = AttentionInput::random(n, 16, n as u64);
        let inp = AttentionInput::new(normalize_rows(&raw.q), normalize_rows(&raw.k), raw.v)?;
        let exact = softmax_attention_ref(&inp);

        let mut s = Session::open(cfg, SessionSeeds::from_master(1));
        s.set_phase(Phase::Input);
        let shared = SecureAttentionInput::share(&mut s, &inp)?;
        s.set_phase(Phase::Forward);
        let soft = sec_softmax_attention(&mut s, &shared)?;
        let soft_bytes = s.ledger().bytes(Phase::Forward);
        let rfa = sec_rfa(&mut s, &shared, &params)?;
        let rfa_bytes = s.ledger().bytes(Phase::Forward) - soft_bytes;

        let mse = |m: &nalgebra::DMatrix<f64>| (m - &exact).map(|v| v * v).mean();
        println!(
            "n={n:<4} softmax {:>10} B (mse {:.1e})   rfa {:>9} B (mse {:.1e})",
            soft_bytes,
            mse(&soft.reveal_matrix(&cfg)),
            rfa_bytes,
            mse(&rfa.reveal_matrix(&cfg))
        );
    }
    Ok(())
}
