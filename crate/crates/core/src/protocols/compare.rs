//! Sign extraction over XOR-shared words.
//!
//! Each server's additive share is read as a bit vector; the sign of the
//! shared value is the top bit of `x_0 + x_1`, computed with a parallel-prefix
//! carry circuit. The first prefix level is expanded into cross products of
//! bits owned by one server each, so it costs a single round like every later
//! level: `log2(ell)` rounds for the carry, plus one round to turn the XOR
//! shared bit into an additive share.

use crate::error::Result;
use crate::runtime::dealer::{packed_words, BitMask, BitTriple, Material, Request};
use crate::runtime::{Session, Tag};
use crate::share::Shared;
use crate::tensor::RingTensor;

/// XOR shares of a batch of 64-bit words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Bits {
    pub shares: [Vec<u64>; 2],
}

impl Bits {
    fn local(&self, f: impl Fn(usize, &[u64]) -> Vec<u64>) -> Bits {
        Bits { shares: [f(0, &self.shares[0]), f(1, &self.shares[1])] }
    }

    fn xor(&self, other: &Bits) -> Bits {
        self.local(|j, s| s.iter().zip(&other.shares[j]).map(|(a, b)| a ^ b).collect())
    }

    fn shl(&self, k: u32) -> Bits {
        self.local(|_, s| s.iter().map(|v| v << k).collect())
    }

    /// Word known to party `owner`; the other party holds zero.
    fn owned(owner: usize, words: Vec<u64>) -> Bits {
        let zeros = vec![0; words.len()];
        if owner == 0 {
            Bits { shares: [words, zeros] }
        } else {
            Bits { shares: [zeros, words] }
        }
    }

    #[cfg(test)]
    fn reveal(&self) -> Vec<u64> {
        self.shares[0].iter().zip(&self.shares[1]).map(|(a, b)| a ^ b).collect()
    }
}

fn take_bit_triple(session: &mut Session, words: usize) -> Result<BitTriple> {
    match session.take(Request::BitTriple { words })? {
        Material::BitTriple(t) => Ok(t),
        _ => unreachable!("bit-triple request yields bit triples"),
    }
}

fn take_bit_mask(session: &mut Session, bits: usize) -> Result<BitMask> {
    match session.take(Request::BitMask { bits })? {
        Material::BitMask(m) => Ok(m),
        _ => unreachable!("bit-mask request yields bit masks"),
    }
}

/// ANDs every pair in one round.
pub(crate) fn and_batch(session: &mut Session, pairs: &[(&Bits, &Bits)]) -> Result<Vec<Bits>> {
    let lens: Vec<usize> = pairs.iter().map(|(x, _)| x.shares[0].len()).collect();
    let total: usize = lens.iter().sum();
    let triple = take_bit_triple(session, total)?;
    session.consume(triple.id)?;

    // Flatten x and y across pairs so one triple batch covers the round.
    let flat = |second: bool, j: usize| -> Vec<u64> {
        pairs.iter().flat_map(|p| if second { &p.1.shares[j] } else { &p.0.shares[j] }).copied().collect()
    };
    let x = [flat(false, 0), flat(false, 1)];
    let y = [flat(true, 0), flat(true, 1)];
    let masked = |v: &[u64], m: &[u64]| -> Vec<u64> { v.iter().zip(m).map(|(a, b)| a ^ b).collect() };
    let mut outgoing: [Vec<RingTensor>; 2] = [Vec::new(), Vec::new()];
    for j in 0..2 {
        let t = &triple.shares[j];
        let mut payload = masked(&x[j], &t.a);
        payload.extend(masked(&y[j], &t.b));
        outgoing[j].push(RingTensor::new(vec![2 * total], payload).unwrap());
    }
    let received = session.exchange(Tag::BitAnd, outgoing.clone())?;

    let mut z: [Vec<u64>; 2] = [Vec::with_capacity(total), Vec::with_capacity(total)];
    for j in 0..2 {
        let own = outgoing[j][0].data();
        let peer = received[j][0].data();
        let t = &triple.shares[j];
        for i in 0..total {
            let d = own[i] ^ peer[i];
            let e = own[total + i] ^ peer[total + i];
            let mut v = (d & t.b[i]) ^ (e & t.a[i]) ^ t.c[i];
            if j == 0 {
                v ^= d & e;
            }
            z[j].push(v);
        }
    }

    let mut out = Vec::with_capacity(pairs.len());
    let mut at = 0;
    for len in lens {
        out.push(Bits { shares: [z[0][at..at + len].to_vec(), z[1][at..at + len].to_vec()] });
        at += len;
    }
    Ok(out)
}

/// XOR shares of the sign bit (bit 0 of each word) of every element.
pub(crate) fn sign_bits(session: &mut Session, x: &Shared) -> Result<Bits> {
    let ell = session.cfg().ell();
    let a = x.share(0).data().to_vec();
    let b = x.share(1).data().to_vec();
    let shl = |v: &[u64], k: u32| -> Vec<u64> { v.iter().map(|w| w << k).collect() };
    let and = |u: &[u64], v: &[u64]| -> Vec<u64> { u.iter().zip(v).map(|(p, q)| p & q).collect() };

    // Party-local inputs of the first prefix level.
    let a_lo = shl(&a, 1);
    let b_lo = shl(&b, 1);
    let aa = and(&a, &a_lo);
    let bb = and(&b, &b_lo);

    // Level 1: G = a·b ⊕ (a_i a_{i-1})·b_{i-1} ⊕ a_{i-1}·(b_i b_{i-1}),
    //          P = a_i a_{i-1} ⊕ b_i b_{i-1} ⊕ a_i·b_{i-1} ⊕ a_{i-1}·b_i.
    let x1 = Bits::owned(0, a.clone());
    let y1 = Bits::owned(1, b.clone());
    let x2 = Bits::owned(0, aa.clone());
    let y2 = Bits::owned(1, b_lo.clone());
    let x3 = Bits::owned(0, a_lo.clone());
    let y3 = Bits::owned(1, bb.clone());
    let y5 = Bits::owned(1, b.clone());
    let cross = and_batch(session, &[(&x1, &y1), (&x2, &y2), (&x3, &y3), (&x1, &y2), (&x3, &y5)])?;
    let mut g = cross[0].xor(&cross[1]).xor(&cross[2]);
    let mut p = Bits { shares: [aa, bb] }.xor(&cross[3]).xor(&cross[4]);

    // Remaining levels double the span each round.
    let mut k = 2;
    while k < ell {
        let g_shift = g.shl(k);
        if 2 * k < ell {
            let p_shift = p.shl(k);
            let r = and_batch(session, &[(&p, &g_shift), (&p, &p_shift)])?;
            g = g.xor(&r[0]);
            p = r[1].clone();
        } else {
            let r = and_batch(session, &[(&p, &g_shift)])?;
            g = g.xor(&r[0]);
        }
        k *= 2;
    }

    // sign = a_{ell-1} ⊕ b_{ell-1} ⊕ carry into bit ell-1.
    let top = ell - 1;
    Ok(Bits {
        shares: [
            a.iter().zip(&g.shares[0]).map(|(w, c)| ((w >> top) ^ (c >> (top - 1))) & 1).collect(),
            b.iter().zip(&g.shares[1]).map(|(w, c)| ((w >> top) ^ (c >> (top - 1))) & 1).collect(),
        ],
    })
}

/// Converts XOR-shared bits (bit 0 of each word) to additive shares of the
/// unscaled integers 0/1. One round; the opened bits travel packed.
pub(crate) fn bits_to_arith(session: &mut Session, bits: &Bits, shape: &[usize]) -> Result<Shared> {
    let cfg = *session.cfg();
    let n = bits.shares[0].len();
    let mask = take_bit_mask(session, n)?;
    session.consume(mask.id)?;
    let words = packed_words(n);
    let pack = |v: &[u64]| -> Vec<u64> {
        let mut out = vec![0u64; words];
        for (i, b) in v.iter().enumerate() {
            out[i / 64] |= (b & 1) << (i % 64);
        }
        out
    };
    let mut outgoing: [Vec<RingTensor>; 2] = [Vec::new(), Vec::new()];
    for j in 0..2 {
        let packed: Vec<u64> = pack(&bits.shares[j]).iter().zip(&mask.shares[j].packed).map(|(a, b)| a ^ b).collect();
        outgoing[j].push(RingTensor::new(vec![words], packed).unwrap());
    }
    let received = session.exchange(Tag::BitToArith, outgoing.clone())?;
    let opened: Vec<u64> = outgoing[0][0].data().iter().zip(received[0][0].data()).map(|(a, b)| a ^ b).collect();
    debug_assert_eq!(
        opened,
        outgoing[1][0].data().iter().zip(received[1][0].data()).map(|(a, b)| a ^ b).collect::<Vec<_>>()
    );
    Shared::try_from_fn(|j| {
        let r = mask.shares[j].arith.data();
        let data = (0..n)
            .map(|i| {
                let c = (opened[i / 64] >> (i % 64)) & 1;
                // b = c + r - 2cr
                let mut v = if c == 1 { cfg.neg(r[i]) } else { r[i] };
                if j == 0 {
                    v = cfg.add(v, c);
                }
                v
            })
            .collect();
        RingTensor::new(shape.to_vec(), data)
    })
}

/// Additive shares of `[x < 0]` as unscaled ring integers.
pub(crate) fn less_than_zero(session: &mut Session, x: &Shared) -> Result<Shared> {
    let n = x.len() as u64;
    let bits = sign_bits(session, x)?;
    let stats = session.stats_mut();
    stats.comparisons += n;
    stats.comparison_calls += 1;
    bits_to_arith(session, &bits, x.shape())
}

#[cfg(test)]
pub(crate) fn reveal_bits(b: &Bits) -> Vec<u64> {
    b.reveal()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::FixedPointConfig;
    use crate::runtime::SessionSeeds;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn and_batch_is_bitwise_and() {
        let mut s = Session::open(FixedPointConfig::default(), SessionSeeds::from_master(1));
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let mk = |rng: &mut ChaCha20Rng| {
            let v: Vec<u64> = (0..5).map(|_| rng.next_u64()).collect();
            let r: Vec<u64> = (0..5).map(|_| rng.next_u64()).collect();
            let s1 = v.iter().zip(&r).map(|(a, b)| a ^ b).collect();
            (v, Bits { shares: [r, s1] })
        };
        let (xv, x) = mk(&mut rng);
        let (yv, y) = mk(&mut rng);
        let out = and_batch(&mut s, &[(&x, &y), (&y, &y)]).unwrap();
        let expect: Vec<u64> = xv.iter().zip(&yv).map(|(a, b)| a & b).collect();
        assert_eq!(reveal_bits(&out[0]), expect);
        assert_eq!(reveal_bits(&out[1]), yv);
    }

    #[test]
    fn sign_bits_match_plain_sign() {
        for cfg in [FixedPointConfig::default(), FixedPointConfig::new(32, 12).unwrap()] {
            let mut s = Session::open(cfg, SessionSeeds::from_master(3));
            let mut rng = ChaCha20Rng::seed_from_u64(4);
            let mut vals: Vec<u64> = (0..500).map(|_| cfg.sample(rng.next_u64())).collect();
            vals.extend([0, 1, cfg.mask(), cfg.mask() >> 1, (cfg.mask() >> 1) + 1]);
            let x = RingTensor::new(vec![vals.len()], vals.clone()).unwrap();
            let sh = s.client_share(&x).unwrap();
            let bits = sign_bits(&mut s, &sh).unwrap();
            let got = reveal_bits(&bits);
            for (v, b) in vals.iter().zip(got) {
                assert_eq!(b, (v >> (cfg.ell() - 1)) & 1, "value {v:#x}");
            }
            let arith = bits_to_arith(&mut s, &bits, &[vals.len()]).unwrap().reveal(&cfg);
            for (v, b) in vals.iter().zip(arith.data()) {
                assert_eq!(*b, (v >> (cfg.ell() - 1)) & 1);
            }
        }
    }
}
