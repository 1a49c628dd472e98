//! Split a vector into two additive shares and put it back together.

use mpc_prompt::ring::FixedPointConfig;
use mpc_prompt::share::{reconstruct, share};
use mpc_prompt::tensor::RingTensor;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> mpc_prompt::error::Result<()> {
    let cfg = FixedPointConfig::default();
    let x = RingTensor::encode_slice(&cfg, &[4], &[1.5, -2.25, 0.0, 3.0])?;
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let (s0, s1) = share(&x, &cfg, &mut rng);
    // Each share alone is a uniform ring element.
    println!("share 0: {:x?}", s0.value.data());
    println!("share 1: {:x?}", s1.value.data());
    let back = reconstruct(&s0, &s1, &cfg)?;
    println!("reconstructed: {:?}", back.decode(&cfg));
    Ok(())
}
