//! Secure comparison, maximum and ReLU.

use mpc_prompt::protocols::{sec_compare, sec_max, sec_relu};
use mpc_prompt::ring::FixedPointConfig;
use mpc_prompt::runtime::{Phase, Session, SessionSeeds};
use mpc_prompt::tensor::RingTensor;

fn main() -> mpc_prompt::error::Result<()> {
    let cfg = FixedPointConfig::default();
    let mut s = Session::open(cfg, SessionSeeds::from_master(5));
    s.set_phase(Phase::Input);
    let x = s.client_share(&RingTensor::encode_slice(&cfg, &[4], &[1.0, -3.0, 2.5, 0.0])?)?;
    let y = s.client_share(&RingTensor::encode_slice(&cfg, &[4], &[2.0, -4.0, 2.5, 0.001])?)?;
    s.set_phase(Phase::Forward);

    let before = s.ledger().rounds(Phase::Forward);
    let lt = sec_compare(&mut s, &x, &y)?;
    println!("[x < y] = {:?} in {} rounds", lt.reveal_f64(&cfg), s.ledger().rounds(Phase::Forward) - before);
    println!("max(x) = {:?}", sec_max(&mut s, &x)?.reveal_f64(&cfg));
    println!("relu(x) = {:?}", sec_relu(&mut s, &x)?.reveal_f64(&cfg));
    Ok(())
}
