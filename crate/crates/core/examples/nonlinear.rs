//! Iterative kernels against their plaintext iterations.

use mpc_prompt::protocols::reference::{exp_iter, inv_sqrt_iter, reciprocal_iter, sqrt_iter};
use mpc_prompt::protocols::{sec_exp, sec_inv_sqrt, sec_reciprocal, sec_sqrt};
use mpc_prompt::ring::FixedPointConfig;
use mpc_prompt::runtime::{Phase, Session, SessionSeeds};
use mpc_prompt::share::Shared;
use mpc_prompt::tensor::RingTensor;

type Kernel = fn(&mut Session, &Shared) -> mpc_prompt::error::Result<Shared>;

fn main() -> mpc_prompt::error::Result<()> {
    let cfg = FixedPointConfig::default();
    let cases: [(&str, Kernel, fn(f64) -> f64, [f64; 4]); 4] = [
        ("exp", sec_exp, exp_iter, [-4.0, -1.0, 0.5, 4.0]),
        ("1/x", sec_reciprocal, reciprocal_iter, [0.2, 1.0, 3.0, 8.0]),
        ("1/sqrt", sec_inv_sqrt, inv_sqrt_iter, [0.1, 1.0, 2.0, 8.0]),
        ("sqrt", sec_sqrt, sqrt_iter, [0.1, 1.0, 2.0, 8.0]),
    ];
    for (name, kernel, oracle, xs) in cases {
        let mut s = Session::open(cfg, SessionSeeds::from_master(1));
        s.set_phase(Phase::Input);
        let x = s.client_share(&RingTensor::encode_slice(&cfg, &[4], &xs)?)?;
        s.set_phase(Phase::Forward);
        let y = kernel(&mut s, &x)?.reveal_f64(&cfg);
        let err = xs.iter().zip(&y).map(|(x, y)| (oracle(*x) - y).abs()).fold(0.0, f64::max);
        println!("{name:<7} {y:>9.4?}  max err {err:.1e}  rounds {}", s.ledger().rounds(Phase::Forward));
    }
    Ok(())
}
