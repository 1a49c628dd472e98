//! Comparison, max, and the polynomial/Newton approximations of exp,
//! reciprocal, inverse square root; plus the one-round masked cosine.

use std::f64::consts::{FRAC_PI_2, TAU};

use crate::error::{Error, Result};
use crate::protocols::compare::less_than_zero;
use crate::protocols::linear::{add_const, mul_const, mul_int, sec_mul, sec_mul_raw, sec_square, sec_sub, truncate};
use crate::runtime::dealer::{CosineMask, Material, Request};
use crate::runtime::{Session, Tag};
use crate::share::Shared;
use crate::tensor::RingTensor;

/// Squarings in the exponential approximant `(1 + x/2^n)^(2^n)`.
pub const EXP_SQUARINGS: u32 = 8;
pub const RECIPROCAL_ITERATIONS: usize = 10;
pub const INV_SQRT_ITERATIONS: usize = 3;

/// Starting point of the inverse-square-root iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InvSqrtInit {
    /// `2.2·e^{-(x/2 + 0.2)} + 0.2 − x/1024`.
    #[default]
    Backend,
    /// `e^{-2.2(x/2 + 0.2)} + 0.198046875`. Converges too slowly in three
    /// steps to be accurate near 1; kept for comparison.
    Literal,
}

/// Shares of `[x < y]` as unscaled ring integers 0/1.
pub fn sec_compare_raw(session: &mut Session, x: &Shared, y: &Shared) -> Result<Shared> {
    let z = sec_sub(session, x, y)?;
    less_than_zero(session, &z)
}

/// Shares of `[x < y]` encoded as fixed point (1.0 or 0.0).
/// `log2(ell) + 1` rounds.
pub fn sec_compare(session: &mut Session, x: &Shared, y: &Shared) -> Result<Shared> {
    let b = sec_compare_raw(session, x, y)?;
    Ok(mul_int(session, &b, 1i64 << session.cfg().frac_bits()))
}

/// `b ? y : x` for an unscaled shared bit `b`. One multiplication round.
fn select(session: &mut Session, b: &Shared, x: &Shared, y: &Shared) -> Result<Shared> {
    let diff = sec_sub(session, y, x)?;
    let picked = sec_mul_raw(session, b, &diff)?;
    crate::protocols::linear::sec_add(session, x, &picked)
}

/// Row maxima of an `r×c` tensor by tree reduction, all rows batched into
/// each level. Returns `r×1`.
pub fn sec_max_rows(session: &mut Session, x: &Shared) -> Result<Shared> {
    let (rows, cols) = x.dims2();
    if cols == 0 || rows == 0 {
        return Err(Error::Empty("max over no elements"));
    }
    let mut cur = x.reshape(&[rows, cols])?;
    let mut width = cols;
    while width > 1 {
        let half = width / 2;
        let left = cur.slice_cols(0, half)?;
        let right = cur.slice_cols(half, half)?;
        let b = sec_compare_raw(session, &left, &right)?;
        let winners = select(session, &b, &left, &right)?;
        cur = if width % 2 == 1 { Shared::concat_cols(&[winners, cur.slice_cols(2 * half, 1)?])? } else { winners };
        width = half + width % 2;
    }
    Ok(cur)
}

/// Maximum of all elements; `ceil(log2 n)` comparison levels, `n − 1` comparisons.
pub fn sec_max(session: &mut Session, v: &Shared) -> Result<Shared> {
    if v.is_empty() {
        return Err(Error::Empty("max over no elements"));
    }
    let m = sec_max_rows(session, &v.reshape(&[1, v.len()])?)?;
    m.reshape(&[1])
}

/// Extra fractional bits carried by `w_k = y_k − 1` at each squaring step.
/// Early steps, whose rounding error is amplified most, keep the most bits;
/// the schedule keeps every squared product below `2^40` over `[-16, 8]`.
const EXP_EXTRA_BITS: [u32; 8] = [8, 7, 6, 5, 4, 3, 1, 0];
/// Working scale of `w_k`, in bits above `f`.
const EXP_WIDE_BITS: u32 = 16;

/// `(1 + x/256)^256` with eight sequential squarings.
///
/// With a 64-bit ring and `f ≤ 16` the iteration runs on `w = y − 1` at
/// `2^(f+16)` scale: `w ← 2w + w²`, where the doubling is exact and only
/// `w²` is computed from a copy truncated to the step's precision. Smaller
/// rings square `y` directly at scale `2^f`.
///
/// Meaningful for decoded `x` in `[-16, 8]`; outside that range the result is
/// unspecified (the base turns negative below −256 and overflows well above 8).
pub fn sec_exp(session: &mut Session, x: &Shared) -> Result<Shared> {
    let cfg = *session.cfg();
    let f = cfg.frac_bits();
    if cfg.ell() < 64 || f > 16 {
        let mut y = add_const(session, &truncate(session, x, EXP_SQUARINGS), 1.0)?;
        for _ in 0..EXP_SQUARINGS {
            y = sec_square(session, &y)?;
        }
        return Ok(y);
    }
    let wide = f + EXP_WIDE_BITS;
    // x/256 at scale 2^(f+8) is x's own encoding.
    let mut w = mul_int(session, x, 1 << (EXP_WIDE_BITS - EXP_SQUARINGS));
    for (k, extra) in EXP_EXTRA_BITS.into_iter().enumerate() {
        let s = f + extra;
        let c = if k == 0 { x.clone() } else { truncate(session, &w, wide - s) };
        let sq = sec_mul_raw(session, &c, &c)?;
        let sq = if 2 * s >= wide {
            truncate(session, &sq, 2 * s - wide)
        } else {
            mul_int(session, &sq, 1 << (wide - 2 * s))
        };
        w = crate::protocols::linear::sec_add(session, &mul_int(session, &w, 2), &sq)?;
    }
    add_const(session, &truncate(session, &w, EXP_WIDE_BITS), 1.0)
}

/// Newton iteration `y ← y(2 − xy)` from `3e^{1/2 − x} + 0.003`, ten steps.
/// Intended for `x > 0.05`; non-positive inputs give unspecified values.
pub fn sec_reciprocal(session: &mut Session, x: &Shared) -> Result<Shared> {
    let shifted = add_const(session, &mul_int(session, x, -1), 0.5)?;
    let e = sec_exp(session, &shifted)?;
    let mut y = add_const(session, &mul_const(session, &e, 3.0)?, 0.003)?;
    for _ in 0..RECIPROCAL_ITERATIONS {
        let xy = sec_mul(session, x, &y)?;
        let two_minus = add_const(session, &mul_int(session, &xy, -1), 2.0)?;
        y = sec_mul(session, &y, &two_minus)?;
    }
    Ok(y)
}

/// Newton iteration `y ← y(3 − xy²)/2`, three steps.
pub fn sec_inv_sqrt_with(session: &mut Session, x: &Shared, init: InvSqrtInit) -> Result<Shared> {
    sec_inv_sqrt_steps(session, x, init, INV_SQRT_ITERATIONS)
}

/// As [`sec_inv_sqrt_with`] with an explicit number of Newton steps.
pub fn sec_inv_sqrt_steps(session: &mut Session, x: &Shared, init: InvSqrtInit, steps: usize) -> Result<Shared> {
    let mut y = match init {
        InvSqrtInit::Backend => {
            let arg = add_const(session, &mul_const(session, x, -0.5)?, -0.2)?;
            let e = sec_exp(session, &arg)?;
            let y = add_const(session, &mul_const(session, &e, 2.2)?, 0.2)?;
            sec_sub(session, &y, &mul_const(session, x, 1.0 / 1024.0)?)?
        }
        InvSqrtInit::Literal => {
            let arg = add_const(session, &mul_const(session, x, -1.1)?, -0.44)?;
            let e = sec_exp(session, &arg)?;
            add_const(session, &e, 0.198046875)?
        }
    };
    for _ in 0..steps {
        let y2 = sec_square(session, &y)?;
        let xy2 = sec_mul(session, x, &y2)?;
        let three_minus = add_const(session, &mul_int(session, &xy2, -1), 3.0)?;
        let half = mul_const(session, &three_minus, 0.5)?;
        y = sec_mul(session, &y, &half)?;
    }
    Ok(y)
}

pub fn sec_inv_sqrt(session: &mut Session, x: &Shared) -> Result<Shared> {
    sec_inv_sqrt_with(session, x, InvSqrtInit::default())
}

/// `x · x^{-1/2}`. Intended for `x` in `(0.05, 8]`.
pub fn sec_sqrt(session: &mut Session, x: &Shared) -> Result<Shared> {
    let r = sec_inv_sqrt(session, x)?;
    sec_mul(session, x, &r)
}

/// `x · (1/y)`; `y` must lie in the reciprocal's domain.
pub fn sec_div(session: &mut Session, x: &Shared, y: &Shared) -> Result<Shared> {
    let r = sec_reciprocal(session, y)?;
    if x.shape() != r.shape() {
        return Err(Error::ShapeMismatch { expected: r.shape().to_vec(), actual: x.shape().to_vec() });
    }
    sec_mul(session, x, &r)
}

/// `x · [x > 0]`: one comparison against zero and one multiplication.
pub fn sec_relu(session: &mut Session, x: &Shared) -> Result<Shared> {
    let neg = less_than_zero(session, x)?;
    let dropped = sec_mul_raw(session, &neg, x)?;
    sec_sub(session, x, &dropped)
}

/// Integer `c ≈ L / (2π·2^f)`: multiplying an encoded angle by `c` maps one
/// full turn onto the whole ring, so the ring's wraparound is the period.
fn turn_scale(session: &Session) -> u64 {
    let cfg = session.cfg();
    let c = (cfg.modulus() as f64 / (TAU * cfg.scale())).round();
    c.max(1.0) as u64
}

fn take_cosine_mask(session: &mut Session, count: usize) -> Result<CosineMask> {
    match session.take(Request::Cosine { count })? {
        Material::Cosine(m) => Ok(m),
        _ => unreachable!("cosine request yields masks"),
    }
}

/// Masked cosine using a caller-supplied mask: each server publishes
/// `c·[x]_j + [t]_j` once, and both combine the opened angle with their
/// shares of `sin t` and `cos t`. One round, one ring element per value
/// from each server.
pub fn sec_cosine_with(session: &mut Session, x: &Shared, mask: &CosineMask) -> Result<Shared> {
    let cfg = *session.cfg();
    if mask.len() != x.len() {
        return Err(Error::ShapeMismatch { expected: vec![x.len()], actual: vec![mask.len()] });
    }
    session.consume(mask.id)?;
    let c = turn_scale(session);
    let n = x.len();
    let delta = Shared::try_from_fn(|j| {
        let xs = x.share(j).data();
        let t = mask.shares[j].t.data();
        RingTensor::new(vec![n], (0..n).map(|i| cfg.add(cfg.mul(xs[i], c), t[i])).collect())
    })?;
    let opened = session.open_shared(Tag::Cosine, &delta)?;
    let l = cfg.modulus() as f64;
    let (p, q): (Vec<u64>, Vec<u64>) = opened
        .data()
        .iter()
        .map(|&d| {
            let angle = TAU * (d as f64 / l);
            (cfg.encode_raw(angle.sin()), cfg.encode_raw(angle.cos()))
        })
        .unzip();
    session.stats_mut().cosines += n as u64;
    let y = Shared::try_from_fn(|j| {
        let (u, v) = (mask.shares[j].u.data(), mask.shares[j].v.data());
        let data = (0..n).map(|i| cfg.add(cfg.mul(p[i], u[i]), cfg.mul(q[i], v[i]))).collect();
        RingTensor::new(x.shape().to_vec(), data)
    })?;
    Ok(truncate(session, &y, cfg.frac_bits()))
}

/// Elementwise cosine with a fresh dealer mask. Exactly one online round.
pub fn sec_cosine(session: &mut Session, x: &Shared) -> Result<Shared> {
    let mask = take_cosine_mask(session, x.len())?;
    sec_cosine_with(session, x, &mask)
}

/// `sin x = cos(x − π/2)`; party 0 applies the shift.
pub fn sec_sine_with(session: &mut Session, x: &Shared, mask: &CosineMask) -> Result<Shared> {
    let shifted = add_const(session, x, -FRAC_PI_2)?;
    sec_cosine_with(session, &shifted, mask)
}

pub fn sec_sine(session: &mut Session, x: &Shared) -> Result<Shared> {
    let mask = take_cosine_mask(session, x.len())?;
    sec_sine_with(session, x, &mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::FixedPointConfig;
    use crate::runtime::{Phase, Role, SessionSeeds, WireMessage};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn session(seed: u64) -> Session {
        Session::open(FixedPointConfig::default(), SessionSeeds::from_master(seed))
    }

    fn input(s: &mut Session, v: &[f64]) -> Shared {
        let t = RingTensor::encode_slice(s.cfg(), &[v.len()], v).unwrap();
        s.client_share(&t).unwrap()
    }

    fn reveal(cfg: FixedPointConfig, x: &Shared) -> Vec<f64> {
        x.reveal_f64(&cfg)
    }

    fn uniform(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(lo..hi)).collect()
    }

    use crate::protocols::reference::{
        exp_iter as exp_oracle, inv_sqrt_iter as isqrt_oracle, reciprocal_iter as recip_oracle,
    };

    fn forward_rounds(s: &Session) -> u64 {
        s.ledger().rounds(Phase::Forward)
    }

    #[test]
    fn compare_examples_and_rounds() {
        let mut s = session(1);
        let x = input(&mut s, &[1.0, 2.0, -3.5, 0.0]);
        let y = input(&mut s, &[2.0, 2.0, -3.0, -0.0001]);
        let before = forward_rounds(&s);
        let b = sec_compare(&mut s, &x, &y).unwrap();
        assert_eq!(forward_rounds(&s) - before, 7);
        assert_eq!(reveal(*s.cfg(), &b), vec![1.0, 0.0, 1.0, 0.0]);
        assert_eq!(s.stats().comparisons, 4);
    }

    #[test]
    fn compare_rounds_at_32_bits() {
        let mut s = Session::open(FixedPointConfig::new(32, 12).unwrap(), SessionSeeds::from_master(2));
        let x = input(&mut s, &[1.0]);
        let y = input(&mut s, &[-1.0]);
        let before = forward_rounds(&s);
        let b = sec_compare(&mut s, &x, &y).unwrap();
        assert_eq!(forward_rounds(&s) - before, 6);
        assert_eq!(reveal(*s.cfg(), &b), vec![0.0]);
    }

    #[test]
    fn max_examples() {
        let mut s = session(3);
        let v = input(&mut s, &[3.0, 1.0, 4.0, 1.0, 5.0]);
        let m = sec_max(&mut s, &v).unwrap();
        assert!((reveal(*s.cfg(), &m)[0] - 5.0).abs() <= 2f64.powi(-16));

        let one = input(&mut s, &[-2.25]);
        assert_eq!(reveal(*s.cfg(), &sec_max(&mut s, &one).unwrap()), vec![-2.25]);

        let mut s = session(4);
        let eight = input(&mut s, &[0.5, -1.0, 7.0, 2.0, 3.0, 9.5, -4.0, 1.0]);
        let before = forward_rounds(&s);
        let m = sec_max(&mut s, &eight).unwrap();
        assert_eq!(reveal(*s.cfg(), &m), vec![9.5]);
        assert_eq!(s.stats().comparisons, 7);
        assert_eq!(s.stats().comparison_calls, 3);
        // Three levels of one comparison plus one selection round each.
        assert_eq!(forward_rounds(&s) - before, 3 * 8);
        let empty = input(&mut s, &[]);
        assert!(matches!(sec_max(&mut s, &empty), Err(Error::Empty(_))));
    }

    #[test]
    fn row_max_matches_plain() {
        let mut s = session(5);
        let vals = uniform(6, 7 * 13, -20.0, 20.0);
        let x = input(&mut s, &vals).reshape(&[7, 13]).unwrap();
        let got = reveal(*s.cfg(), &sec_max_rows(&mut s, &x).unwrap());
        for (r, g) in got.iter().enumerate() {
            let want = vals[r * 13..(r + 1) * 13].iter().cloned().fold(f64::MIN, f64::max);
            assert!((g - want).abs() < 1e-4);
        }
    }

    #[test]
    fn exp_examples_and_rounds() {
        let mut s = session(7);
        let x = input(&mut s, &[0.0, 1.0, -1.0]);
        let before = forward_rounds(&s);
        let y = reveal(*s.cfg(), &sec_exp(&mut s, &x).unwrap());
        assert_eq!(forward_rounds(&s) - before, 8);
        assert!((y[0] - 1.0).abs() <= 2f64.powi(-16) * 8.0);
        assert!((y[1] - 2.7130).abs() < 5e-3);
        assert!((y[2] - 0.3672).abs() < 5e-3);
    }

    #[test]
    fn reciprocal_examples() {
        let mut s = session(8);
        let x = input(&mut s, &[1.0, 4.0, 0.2]);
        let y = reveal(*s.cfg(), &sec_reciprocal(&mut s, &x).unwrap());
        assert!((y[0] - 1.0).abs() < 1e-3);
        assert!((y[1] - 0.25).abs() < 1e-3);
        assert!((y[2] - 5.0).abs() < 2e-2);
        assert!((recip_oracle(4.0) - 0.25).abs() < 1e-9);
    }

    #[test]
    fn sqrt_examples() {
        let mut s = session(9);
        let x = input(&mut s, &[1.0, 4.0, 0.25]);
        let y = reveal(*s.cfg(), &sec_sqrt(&mut s, &x).unwrap());
        assert!((y[0] - 1.0).abs() < 1e-2);
        assert!((y[1] - 2.0).abs() < 2e-2);
        assert!((y[2] - 0.5).abs() < 1e-2);
    }

    #[test]
    fn literal_init_is_less_accurate_near_one() {
        let mut s = session(10);
        let x = input(&mut s, &[1.0]);
        let lit = reveal(*s.cfg(), &sec_inv_sqrt_with(&mut s, &x, InvSqrtInit::Literal).unwrap())[0];
        let mut y = (-2.2f64 * 0.7).exp() + 0.198046875;
        for _ in 0..3 {
            y = 0.5 * y * (3.0 - y * y);
        }
        assert!((lit - y).abs() < 2e-3);
        assert!((lit - 1.0).abs() > 1e-2);
    }

    #[test]
    fn div_examples() {
        let mut s = session(11);
        let x = input(&mut s, &[5.0, 6.0, 1.0]);
        let y = input(&mut s, &[1.0, 3.0, 0.5]);
        let q = reveal(*s.cfg(), &sec_div(&mut s, &x, &y).unwrap());
        assert!((q[0] - 5.0).abs() < 5e-3);
        assert!((q[1] - 2.0).abs() < 2e-3);
        assert!((q[2] - 2.0).abs() < 2e-3);
    }

    #[test]
    fn relu_examples() {
        let mut s = session(12);
        let x = input(&mut s, &[2.0, -2.0, 0.0]);
        let y = reveal(*s.cfg(), &sec_relu(&mut s, &x).unwrap());
        assert_eq!(y, vec![2.0, 0.0, 0.0]);
    }

    #[test]
    fn iterations_match_oracles() {
        let n = 1000;
        let tol = |iters: f64| 1e-3 + 2f64.powi(-16) * iters;
        let mut s = session(13);

        let xs = uniform(14, n, -16.0, 4.0);
        let y = reveal(*s.cfg(), &{
            let x = input(&mut s, &xs);
            sec_exp(&mut s, &x).unwrap()
        });
        for (x, y) in xs.iter().zip(&y) {
            let want = exp_oracle(*x);
            assert!((y - want).abs() <= tol(8.0), "exp({x}) = {y}, want {want}");
        }

        let xs = uniform(15, n, 0.05, 10.0);
        let x = input(&mut s, &xs);
        let y = reveal(*s.cfg(), &sec_reciprocal(&mut s, &x).unwrap());
        for (x, y) in xs.iter().zip(&y) {
            assert!((y - recip_oracle(*x)).abs() <= tol(10.0) * recip_oracle(*x).max(1.0), "1/{x} = {y}");
        }

        let xs = uniform(16, n, 0.05, 8.0);
        let x = input(&mut s, &xs);
        let y = reveal(*s.cfg(), &sec_sqrt(&mut s, &x).unwrap());
        for (x, y) in xs.iter().zip(&y) {
            assert!((y - x * isqrt_oracle(*x)).abs() <= tol(3.0), "sqrt({x}) = {y}");
        }

        let xs = uniform(17, n, -8.0, 8.0);
        let x = input(&mut s, &xs);
        let y = reveal(*s.cfg(), &sec_relu(&mut s, &x).unwrap());
        for (x, y) in xs.iter().zip(&y) {
            assert!((y - x.max(0.0)).abs() <= 2f64.powi(-15));
        }
    }

    #[test]
    fn cosine_examples_and_cost() {
        let mut s = session(20);
        let x = input(&mut s, &[0.0, std::f64::consts::PI]);
        let before = s.ledger().clone();
        let y = reveal(*s.cfg(), &sec_cosine(&mut s, &x).unwrap());
        let delta = s.ledger().delta_since(&before);
        assert_eq!(delta.rounds(Phase::Forward), 1);
        // One 64-bit element per value from each server.
        assert_eq!(delta.server_bytes(Phase::Forward), 2 * 2 * 8);
        assert!((y[0] - 1.0).abs() < 1e-3);
        assert!((y[1] + 1.0).abs() < 1e-3);
    }

    #[test]
    fn cosine_matches_plain_on_many_inputs() {
        let mut s = session(21);
        let xs = uniform(22, 10_000, -std::f64::consts::PI, std::f64::consts::PI);
        let x = input(&mut s, &xs);
        let y = reveal(*s.cfg(), &sec_cosine(&mut s, &x).unwrap());
        let worst = xs.iter().zip(&y).map(|(x, y)| (y - x.cos()).abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-3, "max error {worst}");
    }

    #[test]
    fn sine_examples() {
        let mut s = session(23);
        let x = input(&mut s, &[0.0, FRAC_PI_2, -FRAC_PI_2]);
        let y = reveal(*s.cfg(), &sec_sine(&mut s, &x).unwrap());
        for (g, w) in y.iter().zip([0.0, 1.0, -1.0]) {
            assert!((g - w).abs() < 1e-3);
        }
    }

    #[test]
    fn cosine_is_periodic() {
        let mut s = session(24);
        let xs = uniform(25, 200, -10.0, 10.0);
        let shifted: Vec<f64> = xs.iter().map(|x| x + TAU).collect();
        let a = {
            let x = input(&mut s, &xs);
            reveal(*s.cfg(), &sec_cosine(&mut s, &x).unwrap())
        };
        let b = {
            let x = input(&mut s, &shifted);
            reveal(*s.cfg(), &sec_cosine(&mut s, &x).unwrap())
        };
        for (a, b) in a.iter().zip(&b) {
            assert!((a - b).abs() <= 2e-3);
        }
    }

    #[test]
    fn cosine_mask_cannot_be_reused() {
        let mut s = session(26);
        let x = input(&mut s, &[0.3]);
        let mask = s.dealer_cosine_masks(1).unwrap();
        sec_cosine_with(&mut s, &x, &mask).unwrap();
        assert!(matches!(sec_cosine_with(&mut s, &x, &mask), Err(Error::Reused(_))));
    }

    /// Opened angles, read back from the wire, as fractions of a turn.
    fn opened_angles(s: &Session) -> Vec<f64> {
        let cfg = *s.cfg();
        let entries = s.transcript().unwrap();
        let mut from = [Vec::new(), Vec::new()];
        for e in entries {
            let msg = WireMessage::decode(&e.bytes).unwrap();
            if msg.tag == Tag::Cosine {
                from[(e.from == Role::S1) as usize].extend_from_slice(msg.tensor.data());
            }
        }
        from[0].iter().zip(&from[1]).map(|(a, b)| cfg.add(*a, *b) as f64 / cfg.modulus() as f64).collect()
    }

    #[test]
    fn opened_angle_is_uniform_whatever_the_input() {
        use statrs::distribution::{ContinuousCDF, Uniform};
        let u = Uniform::new(0.0, 1.0).unwrap();
        for (k, x) in [-2.0, 0.0, 1.5].into_iter().enumerate() {
            let mut s = session(30 + k as u64);
            let xs = input(&mut s, &vec![x; 10_000]);
            s.record_transcript();
            sec_cosine(&mut s, &xs).unwrap();
            let mut d = opened_angles(&s);
            assert_eq!(d.len(), 10_000);
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = d.len() as f64;
            let ks = d
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let c = u.cdf(*v);
                    (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
                })
                .fold(0.0, f64::max);
            // 1% critical value of the one-sample KS statistic.
            assert!(ks < 1.63 / n.sqrt(), "x={x}: D={ks}");
        }
    }
}
