//! Multiply secret values with dealer-supplied Beaver triples and read the
//! cost off the ledger.

use mpc_prompt::protocols::{sec_matmul, sec_mul};
use mpc_prompt::ring::FixedPointConfig;
use mpc_prompt::runtime::{Phase, Role, Session, SessionSeeds};
use mpc_prompt::tensor::RingTensor;

fn main() -> mpc_prompt::error::Result<()> {
    let cfg = FixedPointConfig::default();
    let mut s = Session::open(cfg, SessionSeeds::from_master(3));
    s.set_phase(Phase::Input);
    let x = s.client_share(&RingTensor::encode_slice(&cfg, &[3], &[1.5, -2.0, 7.25])?)?;
    let y = s.client_share(&RingTensor::encode_slice(&cfg, &[3], &[4.0, 0.5, -1.0])?)?;

    s.set_phase(Phase::Forward);
    let z = sec_mul(&mut s, &x, &y)?;
    println!("x*y = {:?}", z.reveal_f64(&cfg));
    let e = s.ledger().entry(Phase::Forward, Role::S0);
    println!("elementwise: {} round, {} bytes sent by each server", e.rounds, e.bytes);

    let a = s.client_share(&RingTensor::encode_slice(&cfg, &[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0])?)?;
    let b = s.client_share(&RingTensor::encode_slice(&cfg, &[3, 2], &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0])?)?;
    let c = sec_matmul(&mut s, &a, &b)?;
    println!("A·B = {}", c.reveal_matrix(&cfg));
    println!("offline (dealer) bytes so far: {}", s.ledger().bytes(Phase::Offline));
    Ok(())
}
