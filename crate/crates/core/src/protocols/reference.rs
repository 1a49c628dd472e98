//! Plaintext `f64` versions of the secure iterations, with the same
//! initialisers and step counts. Differences to these are fixed-point error.

use super::{EXP_SQUARINGS, INV_SQRT_ITERATIONS, RECIPROCAL_ITERATIONS};

pub fn exp_iter(x: f64) -> f64 {
    let k = 1u32 << EXP_SQUARINGS;
    (1.0 + x / f64::from(k)).powi(k as i32)
}

pub fn reciprocal_iter(x: f64) -> f64 {
    let mut y = 3.0 * exp_iter(0.5 - x) + 0.003;
    for _ in 0..RECIPROCAL_ITERATIONS {
        y *= 2.0 - x * y;
    }
    y
}

pub fn inv_sqrt_iter(x: f64) -> f64 {
    let mut y = 2.2 * exp_iter(-(x / 2.0 + 0.2)) + 0.2 - x / 1024.0;
    for _ in 0..INV_SQRT_ITERATIONS {
        y = 0.5 * y * (3.0 - x * y * y);
    }
    y
}

pub fn sqrt_iter(x: f64) -> f64 {
    x * inv_sqrt_iter(x)
}
