//! One-round cosine: the servers open a masked angle and finish locally
//! with the angle-sum identity.

use std::f64::consts::PI;

use mpc_prompt::protocols::{sec_cosine, sec_sine};
use mpc_prompt::ring::FixedPointConfig;
use mpc_prompt::runtime::{Phase, Role, Session, SessionSeeds};
use mpc_prompt::tensor::RingTensor;

fn main() -> mpc_prompt::error::Result<()> {
    let cfg = FixedPointConfig::default();
    let xs: Vec<f64> = (0..8).map(|i| -PI + i as f64 * PI / 4.0).collect();
    let mut s = Session::open(cfg, SessionSeeds::from_master(2));
    s.set_phase(Phase::Input);
    let x = s.client_share(&RingTensor::encode_slice(&cfg, &[xs.len()], &xs)?)?;
    s.set_phase(Phase::Forward);
    let c = sec_cosine(&mut s, &x)?.reveal_f64(&cfg);
    let e = s.ledger().entry(Phase::Forward, Role::S0);
    for (x, c) in xs.iter().zip(&c) {
        println!("cos({x:+.3}) = {c:+.5}  (exact {:+.5})", x.cos());
    }
    println!("{} round, {} bits per value in total", e.rounds, 2 * 8 * e.bytes / xs.len() as u64);
    println!("sin(π/4) ≈ {:?}", sec_sine(&mut s, &x)?.reveal_f64(&cfg)[5]);
    Ok(())
}
