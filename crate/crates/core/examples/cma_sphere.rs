//! CMA-ES on the sphere function.

use mpc_prompt::tuner::CmaState;
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> mpc_prompt::error::Result<()> {
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    let mut es = CmaState::new(DVector::from_element(8, 3.0), 1.0)?;
    for g in 0..300 {
        let xs = es.ask(&mut rng)?;
        let fs: Vec<f64> = xs.iter().map(|x| x.norm_squared()).collect();
        es.tell(&xs, &fs)?;
        let best = fs.iter().copied().fold(f64::INFINITY, f64::min);
        if g % 25 == 0 || best < 1e-8 {
            println!("gen {g:>3}  best {best:.3e}  sigma {:.3e}", es.step_size);
        }
        if best < 1e-8 {
            break;
        }
    }
    Ok(())
}
