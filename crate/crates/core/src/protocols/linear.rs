//! Local affine operations and Beaver-triple products.

use crate::error::{Error, Result};
use crate::runtime::dealer::{BeaverTriple, Material, Request};
use crate::runtime::{Session, Tag};
use crate::share::Shared;
use crate::tensor::RingTensor;

/// `[x + y]_j = [x]_j + [y]_j`. No communication.
pub fn sec_add(session: &Session, x: &Shared, y: &Shared) -> Result<Shared> {
    let cfg = *session.cfg();
    Shared::try_from_fn(|j| x.share(j).add(y.share(j), &cfg))
}

pub fn sec_sub(session: &Session, x: &Shared, y: &Shared) -> Result<Shared> {
    let cfg = *session.cfg();
    Shared::try_from_fn(|j| x.share(j).sub(y.share(j), &cfg))
}

pub fn sec_neg(session: &Session, x: &Shared) -> Shared {
    let cfg = *session.cfg();
    x.map_local(|_, s| s.neg(&cfg))
}

/// Adds a public ring tensor; only party 0 touches its share.
pub fn add_public(session: &Session, x: &Shared, c: &RingTensor) -> Result<Shared> {
    let cfg = *session.cfg();
    x.try_map_local(|j, s| if j == 0 { s.add(c, &cfg) } else { Ok(s.clone()) })
}

/// Adds the public constant `c` to every element.
pub fn add_const(session: &Session, x: &Shared, c: f64) -> Result<Shared> {
    let cfg = *session.cfg();
    let e = cfg.encode(c)?.0;
    Ok(x.map_local(|j, s| if j == 0 { s.map(|v| cfg.add(v, e)) } else { s.clone() }))
}

/// Multiplies by a public integer. Exact, no truncation.
pub fn mul_int(session: &Session, x: &Shared, k: i64) -> Shared {
    let cfg = *session.cfg();
    let k = cfg.from_signed(k);
    x.map_local(|_, s| s.scale(k, &cfg))
}

/// Local probabilistic truncation by `bits`.
pub fn truncate(session: &Session, x: &Shared, bits: u32) -> Shared {
    let cfg = *session.cfg();
    x.map_local(|j, s| s.map(|v| cfg.truncate_share(j, v, bits)))
}

/// Multiplies by the public real `c`, then truncates.
pub fn mul_const(session: &Session, x: &Shared, c: f64) -> Result<Shared> {
    let cfg = *session.cfg();
    let e = cfg.encode(c)?.0;
    Ok(x.map_local(|j, s| s.map(|v| cfg.truncate_share(j, cfg.mul(v, e), cfg.frac_bits()))))
}

/// Elementwise product with a public fixed-point tensor, then truncation.
pub fn mul_public(session: &Session, x: &Shared, w: &RingTensor) -> Result<Shared> {
    let cfg = *session.cfg();
    let f = cfg.frac_bits();
    x.try_map_local(|j, s| Ok(s.mul_elem(w, &cfg)?.map(|v| cfg.truncate_share(j, v, f))))
}

/// `x · W` for a public fixed-point matrix `W`, then truncation.
pub fn matmul_public(session: &Session, x: &Shared, w: &RingTensor) -> Result<Shared> {
    let cfg = *session.cfg();
    let f = cfg.frac_bits();
    x.try_map_local(|j, s| Ok(s.matmul(w, &cfg)?.map(|v| cfg.truncate_share(j, v, f))))
}

/// `p·x (+ q·y)` with public reals `p`, `q`. One truncation, no communication.
pub fn sec_affine_public(session: &Session, x: &Shared, p: f64, other: Option<(&Shared, f64)>) -> Result<Shared> {
    let cfg = *session.cfg();
    let f = cfg.frac_bits();
    let pe = cfg.encode(p)?.0;
    let mut acc = x.map_local(|_, s| s.scale(pe, &cfg));
    if let Some((y, q)) = other {
        let qe = cfg.encode(q)?.0;
        acc = Shared::try_from_fn(|j| acc.share(j).add(&y.share(j).scale(qe, &cfg), &cfg))?;
    }
    Ok(acc.map_local(|j, s| s.map(|v| cfg.truncate_share(j, v, f))))
}

fn take_triple(session: &mut Session, req: Request) -> Result<BeaverTriple> {
    match session.take(req)? {
        Material::Triple(t) => Ok(t),
        _ => unreachable!("triple request yields a triple"),
    }
}

/// Beaver product in the ring, without truncation.
pub fn mul_with_triple_raw(session: &mut Session, x: &Shared, y: &Shared, triple: &BeaverTriple) -> Result<Shared> {
    let cfg = *session.cfg();
    if x.shape() != y.shape() {
        return Err(Error::ShapeMismatch { expected: x.shape().to_vec(), actual: y.shape().to_vec() });
    }
    match &triple.request {
        Request::Triple { shape } if shape.as_slice() == x.shape() => {}
        other => {
            return Err(Error::PlanMismatch { expected: format!("triple{:?}", x.shape()), actual: other.to_string() })
        }
    }
    session.consume(triple.id)?;
    let d = Shared::try_from_fn(|j| x.share(j).sub(&triple.shares[j].a, &cfg))?;
    let e = Shared::try_from_fn(|j| y.share(j).sub(&triple.shares[j].b, &cfg))?;
    let opened = session.open_many(Tag::BeaverMul, &[&d, &e])?;
    let (d, e) = (&opened[0], &opened[1]);
    let de = d.mul_elem(e, &cfg)?;
    session.stats_mut().multiplications += x.len() as u64;
    Shared::try_from_fn(|j| {
        let t = &triple.shares[j];
        let mut z = x.share(j).mul_elem(e, &cfg)?.add(&d.mul_elem(y.share(j), &cfg)?, &cfg)?.add(&t.c, &cfg)?;
        if j == 1 {
            z = z.sub(&de, &cfg)?;
        }
        Ok(z)
    })
}

/// Fixed-point Beaver product using a caller-supplied triple.
pub fn mul_with_triple(session: &mut Session, x: &Shared, y: &Shared, triple: &BeaverTriple) -> Result<Shared> {
    let z = mul_with_triple_raw(session, x, y, triple)?;
    Ok(truncate(session, &z, session.cfg().frac_bits()))
}

/// Ring product without truncation (used when one operand is an unscaled integer).
pub fn sec_mul_raw(session: &mut Session, x: &Shared, y: &Shared) -> Result<Shared> {
    let triple = take_triple(session, Request::Triple { shape: x.shape().to_vec() })?;
    mul_with_triple_raw(session, x, y, &triple)
}

/// Elementwise fixed-point product: one round, then local truncation.
pub fn sec_mul(session: &mut Session, x: &Shared, y: &Shared) -> Result<Shared> {
    let z = sec_mul_raw(session, x, y)?;
    Ok(truncate(session, &z, session.cfg().frac_bits()))
}

pub fn sec_square(session: &mut Session, x: &Shared) -> Result<Shared> {
    sec_mul(session, x, x)
}

/// Matrix Beaver product without truncation.
pub fn matmul_with_triple_raw(session: &mut Session, x: &Shared, y: &Shared, triple: &BeaverTriple) -> Result<Shared> {
    let cfg = *session.cfg();
    let (n, k) = x.dims2();
    let (k2, m) = y.dims2();
    if k != k2 {
        return Err(Error::ShapeMismatch { expected: vec![k, m], actual: vec![k2, m] });
    }
    match triple.request {
        Request::MatTriple { n: tn, k: tk, m: tm } if (tn, tk, tm) == (n, k, m) => {}
        ref other => {
            return Err(Error::PlanMismatch {
                expected: format!("mat-triple[{n}x{k}·{k}x{m}]"),
                actual: other.to_string(),
            })
        }
    }
    session.consume(triple.id)?;
    let x = x.reshape(&[n, k])?;
    let y = y.reshape(&[k, m])?;
    let d = Shared::try_from_fn(|j| x.share(j).sub(&triple.shares[j].a, &cfg))?;
    let e = Shared::try_from_fn(|j| y.share(j).sub(&triple.shares[j].b, &cfg))?;
    let opened = session.open_many(Tag::BeaverMatmul, &[&d, &e])?;
    let (d, e) = (&opened[0], &opened[1]);
    let de = d.matmul(e, &cfg)?;
    session.stats_mut().multiplications += (n * k * m) as u64;
    Shared::try_from_fn(|j| {
        let t = &triple.shares[j];
        let mut z = x.share(j).matmul(e, &cfg)?.add(&d.matmul(y.share(j), &cfg)?, &cfg)?.add(&t.c, &cfg)?;
        if j == 1 {
            z = z.sub(&de, &cfg)?;
        }
        Ok(z)
    })
}

/// Secret `n×k` times secret `k×m`: one round whatever the dimensions.
pub fn sec_matmul(session: &mut Session, x: &Shared, y: &Shared) -> Result<Shared> {
    let (n, k) = x.dims2();
    let (k2, m) = y.dims2();
    if k != k2 {
        return Err(Error::ShapeMismatch { expected: vec![k, m], actual: vec![k2, m] });
    }
    let triple = take_triple(session, Request::MatTriple { n, k, m })?;
    let z = matmul_with_triple_raw(session, x, y, &triple)?;
    Ok(truncate(session, &z, session.cfg().frac_bits()))
}

/// Outer product of a length-`n` column and a length-`m` row.
pub fn sec_outer(session: &mut Session, col: &Shared, row: &Shared) -> Result<Shared> {
    let col = col.reshape(&[col.len(), 1])?;
    let row = row.reshape(&[1, row.len()])?;
    sec_matmul(session, &col, &row)
}
