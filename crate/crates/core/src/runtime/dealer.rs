//! Input-independent correlated randomness.
//!
//! Server `S_j` and the dealer share the PRF key `k_j`. Everything server 0
//! holds is PRF output, as are the random halves held by server 1; the dealer
//! derives the same streams, fixes the correlation, and sends server 1 one
//! correction tensor per request. The dealer keeps no state besides its keys.

use std::f64::consts::TAU;

use crate::ring::FixedPointConfig;
use crate::runtime::prf::PrfKey;
use crate::tensor::RingTensor;

/// Description of one unit of correlated randomness. Shapes are public.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Request {
    /// Elementwise Beaver triple `c = a ⊙ b`.
    Triple { shape: Vec<usize> },
    /// Matrix Beaver triple `C = A·B` with `A: n×k`, `B: k×m`.
    MatTriple { n: usize, k: usize, m: usize },
    /// Cosine masks `(t, sin t, cos t)`, one per element.
    Cosine { count: usize },
    /// XOR-shared AND triples over 64-bit words.
    BitTriple { words: usize },
    /// Random bits shared both as packed XOR words and as ring elements.
    BitMask { bits: usize },
}

impl Request {
    pub fn kind(&self) -> &'static str {
        match self {
            Request::Triple { .. } => "beaver-triple elements",
            Request::MatTriple { .. } => "matrix-triple elements",
            Request::Cosine { .. } => "cosine masks",
            Request::BitTriple { .. } => "bit-triple words",
            Request::BitMask { .. } => "bit masks",
        }
    }

    /// Count of correlated values the request asks for.
    pub fn size(&self) -> usize {
        match self {
            Request::Triple { shape } => shape.iter().product(),
            Request::MatTriple { n, k, m } => n * k + k * m,
            Request::Cosine { count } => *count,
            Request::BitTriple { words } => *words,
            Request::BitMask { bits } => *bits,
        }
    }
}

impl std::fmt::Display for Request {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Request::Triple { shape } => write!(f, "triple{shape:?}"),
            Request::MatTriple { n, k, m } => write!(f, "mat-triple[{n}x{k}·{k}x{m}]"),
            Request::Cosine { count } => write!(f, "cosine[{count}]"),
            Request::BitTriple { words } => write!(f, "bit-triple[{words}]"),
            Request::BitMask { bits } => write!(f, "bit-mask[{bits}]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TripleShare {
    pub a: RingTensor,
    pub b: RingTensor,
    pub c: RingTensor,
}

/// Both servers' shares of one Beaver triple. Single use.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BeaverTriple {
    pub id: u64,
    pub request: Request,
    pub shares: [TripleShare; 2],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskShare {
    /// Share of the mask angle as a fraction of one turn scaled to the ring.
    pub t: RingTensor,
    /// Share of the fixed-point encoding of `sin(2π t / L)`.
    pub u: RingTensor,
    /// Share of the fixed-point encoding of `cos(2π t / L)`.
    pub v: RingTensor,
}

/// Both servers' shares of a batch of cosine masks. Single use.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CosineMask {
    pub id: u64,
    pub shares: [MaskShare; 2],
}

impl CosineMask {
    pub fn len(&self) -> usize {
        self.shares[0].t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitTripleShare {
    pub a: Vec<u64>,
    pub b: Vec<u64>,
    pub c: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitTriple {
    pub id: u64,
    pub shares: [BitTripleShare; 2],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitMaskShare {
    /// XOR share of the bits, 64 per word, little-endian bit order.
    pub packed: Vec<u64>,
    /// Additive share of each bit as an (unscaled) ring integer.
    pub arith: RingTensor,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitMask {
    pub id: u64,
    pub shares: [BitMaskShare; 2],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Material {
    Triple(BeaverTriple),
    Cosine(CosineMask),
    BitTriple(BitTriple),
    BitMask(BitMask),
}

/// Words needed to pack `bits` bits.
pub fn packed_words(bits: usize) -> usize {
    bits.div_ceil(64)
}

/// PRF-derived share components of server `j` for a request, in the order
/// both the server and the dealer consume them.
pub(crate) struct Derived {
    pub words: Vec<Vec<u64>>,
}

/// Expands the PRF-determined components of `req` for server `party`.
pub(crate) fn derive(key: &mut PrfKey, party: usize, req: &Request, cfg: &FixedPointConfig) -> Derived {
    let mut ring = |n: usize| key.expand(n, cfg);
    let words = match req {
        Request::Triple { shape } => {
            let n: usize = shape.iter().product();
            if party == 0 {
                vec![ring(n), ring(n), ring(n)]
            } else {
                vec![ring(n), ring(n)]
            }
        }
        Request::MatTriple { n, k, m } => {
            if party == 0 {
                vec![ring(n * k), ring(k * m), ring(n * m)]
            } else {
                vec![ring(n * k), ring(k * m)]
            }
        }
        Request::Cosine { count } => {
            if party == 0 {
                vec![ring(*count), ring(*count), ring(*count)]
            } else {
                vec![ring(*count)]
            }
        }
        Request::BitTriple { words } => {
            let mut raw = |n: usize| key.expand_words(n);
            if party == 0 {
                vec![raw(*words), raw(*words), raw(*words)]
            } else {
                vec![raw(*words), raw(*words)]
            }
        }
        Request::BitMask { bits } => {
            let w = packed_words(*bits);
            let mut packed = key.expand_words(w);
            if let Some(last) = packed.last_mut() {
                if bits % 64 != 0 {
                    *last &= (1u64 << (bits % 64)) - 1;
                }
            }
            if party == 0 {
                vec![packed, key.expand(*bits, cfg)]
            } else {
                vec![packed]
            }
        }
    };
    Derived { words }
}

/// The trusted dealer: holds copies of both PRF keys, nothing else.
pub struct Dealer {
    keys: [PrfKey; 2],
}

impl Dealer {
    pub fn new(k0: PrfKey, k1: PrfKey) -> Self {
        Self { keys: [k0, k1] }
    }

    /// Correction tensor sent to server 1 for `req`.
    pub(crate) fn correction(&mut self, req: &Request, cfg: &FixedPointConfig) -> RingTensor {
        let d0 = derive(&mut self.keys[0], 0, req, cfg);
        let d1 = derive(&mut self.keys[1], 1, req, cfg);
        match req {
            Request::Triple { shape } => {
                let (a0, b0, c0) = (&d0.words[0], &d0.words[1], &d0.words[2]);
                let (a1, b1) = (&d1.words[0], &d1.words[1]);
                let c1 = (0..a0.len())
                    .map(|i| {
                        let a = cfg.add(a0[i], a1[i]);
                        let b = cfg.add(b0[i], b1[i]);
                        cfg.sub(cfg.mul(a, b), c0[i])
                    })
                    .collect();
                RingTensor::new(shape.clone(), c1).expect("shape matches count")
            }
            Request::MatTriple { n, k, m } => {
                let a = RingTensor::new(vec![*n, *k], add_vec(cfg, &d0.words[0], &d1.words[0])).unwrap();
                let b = RingTensor::new(vec![*k, *m], add_vec(cfg, &d0.words[1], &d1.words[1])).unwrap();
                let c = a.matmul(&b, cfg).expect("dims agree");
                let c0 = RingTensor::new(vec![*n, *m], d0.words[2].clone()).unwrap();
                c.sub(&c0, cfg).unwrap()
            }
            Request::Cosine { count } => {
                let (t0, u0, v0) = (&d0.words[0], &d0.words[1], &d0.words[2]);
                let t1 = &d1.words[0];
                let l = cfg.modulus() as f64;
                let mut out = Vec::with_capacity(2 * count);
                let mut vs = Vec::with_capacity(*count);
                for i in 0..*count {
                    let t = cfg.add(t0[i], t1[i]);
                    let angle = TAU * (t as f64 / l);
                    out.push(cfg.sub(cfg.encode_raw(angle.sin()), u0[i]));
                    vs.push(cfg.sub(cfg.encode_raw(angle.cos()), v0[i]));
                }
                out.extend(vs);
                RingTensor::new(vec![2, *count], out).unwrap()
            }
            Request::BitTriple { words } => {
                let (a0, b0, c0) = (&d0.words[0], &d0.words[1], &d0.words[2]);
                let (a1, b1) = (&d1.words[0], &d1.words[1]);
                let c1 = (0..*words).map(|i| ((a0[i] ^ a1[i]) & (b0[i] ^ b1[i])) ^ c0[i]).collect();
                RingTensor::new(vec![*words], c1).unwrap()
            }
            Request::BitMask { bits } => {
                let (p0, r0) = (&d0.words[0], &d0.words[1]);
                let p1 = &d1.words[0];
                let r1 = (0..*bits)
                    .map(|i| {
                        let bit = ((p0[i / 64] ^ p1[i / 64]) >> (i % 64)) & 1;
                        cfg.sub(bit, r0[i])
                    })
                    .collect();
                RingTensor::new(vec![*bits], r1).unwrap()
            }
        }
    }
}

fn add_vec(cfg: &FixedPointConfig, a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(&x, &y)| cfg.add(x, y)).collect()
}

/// Assembles both servers' material from their PRF streams and the
/// correction server 1 received.
pub(crate) fn assemble(id: u64, req: &Request, d0: Derived, d1: Derived, correction: RingTensor) -> Material {
    let Derived { words: w0 } = d0;
    let Derived { words: w1 } = d1;
    let mut w0 = w0.into_iter();
    let mut w1 = w1.into_iter();
    match req {
        Request::Triple { shape } => {
            let t = |v: Vec<u64>| RingTensor::new(shape.clone(), v).unwrap();
            let s0 = TripleShare { a: t(w0.next().unwrap()), b: t(w0.next().unwrap()), c: t(w0.next().unwrap()) };
            let s1 = TripleShare { a: t(w1.next().unwrap()), b: t(w1.next().unwrap()), c: correction };
            Material::Triple(BeaverTriple { id, request: req.clone(), shares: [s0, s1] })
        }
        Request::MatTriple { n, k, m } => {
            let t = |s: Vec<usize>, v: Vec<u64>| RingTensor::new(s, v).unwrap();
            let s0 = TripleShare {
                a: t(vec![*n, *k], w0.next().unwrap()),
                b: t(vec![*k, *m], w0.next().unwrap()),
                c: t(vec![*n, *m], w0.next().unwrap()),
            };
            let s1 = TripleShare {
                a: t(vec![*n, *k], w1.next().unwrap()),
                b: t(vec![*k, *m], w1.next().unwrap()),
                c: correction,
            };
            Material::Triple(BeaverTriple { id, request: req.clone(), shares: [s0, s1] })
        }
        Request::Cosine { count } => {
            let t = |v: Vec<u64>| RingTensor::new(vec![*count], v).unwrap();
            let s0 = MaskShare { t: t(w0.next().unwrap()), u: t(w0.next().unwrap()), v: t(w0.next().unwrap()) };
            let data = correction.into_data();
            let (u1, v1) = data.split_at(*count);
            let s1 = MaskShare { t: t(w1.next().unwrap()), u: t(u1.to_vec()), v: t(v1.to_vec()) };
            Material::Cosine(CosineMask { id, shares: [s0, s1] })
        }
        Request::BitTriple { .. } => {
            let s0 = BitTripleShare { a: w0.next().unwrap(), b: w0.next().unwrap(), c: w0.next().unwrap() };
            let s1 = BitTripleShare { a: w1.next().unwrap(), b: w1.next().unwrap(), c: correction.into_data() };
            Material::BitTriple(BitTriple { id, shares: [s0, s1] })
        }
        Request::BitMask { bits } => {
            let s0 = BitMaskShare {
                packed: w0.next().unwrap(),
                arith: RingTensor::new(vec![*bits], w0.next().unwrap()).unwrap(),
            };
            let s1 = BitMaskShare { packed: w1.next().unwrap(), arith: correction };
            Material::BitMask(BitMask { id, shares: [s0, s1] })
        }
    }
}
