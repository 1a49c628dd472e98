//! 2-out-of-2 additive secret sharing over `Z_{2^ell}`.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::ring::{FixedPointConfig, RingElement};
use crate::tensor::RingTensor;

/// One of the two computation servers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PartyId {
    P0,
    P1,
}

impl PartyId {
    pub fn index(self) -> usize {
        match self {
            PartyId::P0 => 0,
            PartyId::P1 => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            PartyId::P0
        } else {
            PartyId::P1
        }
    }

    pub fn peer(self) -> Self {
        match self {
            PartyId::P0 => PartyId::P1,
            PartyId::P1 => PartyId::P0,
        }
    }
}

/// A share held by one party. Scalars are rank-0 tensors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecretShare {
    pub party: PartyId,
    pub value: RingTensor,
}

impl SecretShare {
    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }
}

/// Splits `x` into `(r, x - r)` with `r` uniform over the ring.
pub fn share(x: &RingTensor, cfg: &FixedPointConfig, rng: &mut impl RngCore) -> (SecretShare, SecretShare) {
    let r = RingTensor::from_fn(x.shape(), |_| cfg.sample(rng.next_u64()));
    let masked = x.sub(&r, cfg).expect("same shape by construction");
    (SecretShare { party: PartyId::P0, value: r }, SecretShare { party: PartyId::P1, value: masked })
}

pub fn share_scalar(x: RingElement, cfg: &FixedPointConfig, rng: &mut impl RngCore) -> (SecretShare, SecretShare) {
    share(&RingTensor::scalar(x), cfg, rng)
}

/// `x = [x]_0 + [x]_1 mod L`.
pub fn reconstruct(s0: &SecretShare, s1: &SecretShare, cfg: &FixedPointConfig) -> Result<RingTensor> {
    if s0.party != PartyId::P0 || s1.party != PartyId::P1 {
        return Err(Error::PartyMismatch(format!("expected shares of (P0, P1), got ({:?}, {:?})", s0.party, s1.party)));
    }
    s0.value.add(&s1.value, cfg)
}

/// Both parties' shares of one secret tensor.
///
/// Protocol code runs the two servers in lockstep; each half is only ever
/// combined with data its owner holds or received over the session.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shared {
    shares: [RingTensor; 2],
}

impl Shared {
    pub fn from_parts(s0: RingTensor, s1: RingTensor) -> Result<Self> {
        s0.check_same_shape(&s1)?;
        Ok(Self { shares: [s0, s1] })
    }

    pub fn from_shares(s0: SecretShare, s1: SecretShare) -> Result<Self> {
        if s0.party != PartyId::P0 || s1.party != PartyId::P1 {
            return Err(Error::PartyMismatch("shares passed out of order".into()));
        }
        Self::from_parts(s0.value, s1.value)
    }

    pub(crate) fn from_fn(mut f: impl FnMut(usize) -> RingTensor) -> Self {
        let s0 = f(0);
        let s1 = f(1);
        debug_assert_eq!(s0.shape(), s1.shape());
        Self { shares: [s0, s1] }
    }

    pub(crate) fn try_from_fn(mut f: impl FnMut(usize) -> Result<RingTensor>) -> Result<Self> {
        let s0 = f(0)?;
        let s1 = f(1)?;
        Self::from_parts(s0, s1)
    }

    /// Sharing of a public value: party 0 holds it, party 1 holds zero.
    pub fn public(x: RingTensor) -> Self {
        let zeros = RingTensor::zeros(x.shape());
        Self { shares: [x, zeros] }
    }

    pub fn share(&self, party: usize) -> &RingTensor {
        &self.shares[party]
    }

    pub fn into_shares(self) -> (SecretShare, SecretShare) {
        let [s0, s1] = self.shares;
        (SecretShare { party: PartyId::P0, value: s0 }, SecretShare { party: PartyId::P1, value: s1 })
    }

    pub fn shape(&self) -> &[usize] {
        self.shares[0].shape()
    }

    pub fn len(&self) -> usize {
        self.shares[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.shares[0].is_empty()
    }

    pub fn dims2(&self) -> (usize, usize) {
        self.shares[0].dims2()
    }

    /// Applies the same local (communication-free) map to both shares.
    pub(crate) fn map_local(&self, f: impl Fn(usize, &RingTensor) -> RingTensor) -> Self {
        Self::from_fn(|j| f(j, &self.shares[j]))
    }

    pub(crate) fn try_map_local(&self, f: impl Fn(usize, &RingTensor) -> Result<RingTensor>) -> Result<Self> {
        Self::try_from_fn(|j| f(j, &self.shares[j]))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        self.try_map_local(|_, s| s.clone().reshape(shape))
    }

    pub fn transpose(&self) -> Result<Self> {
        self.try_map_local(|_, s| s.transpose())
    }

    pub fn slice_cols(&self, start: usize, width: usize) -> Result<Self> {
        self.try_map_local(|_, s| s.slice_cols(start, width))
    }

    pub fn slice_rows(&self, start: usize, count: usize) -> Result<Self> {
        self.try_map_local(|_, s| s.slice_rows(start, count))
    }

    pub fn concat_cols(parts: &[Self]) -> Result<Self> {
        Self::try_from_fn(|j| RingTensor::concat_cols(&parts.iter().map(|p| p.shares[j].clone()).collect::<Vec<_>>()))
    }

    pub fn concat_rows(parts: &[Self]) -> Result<Self> {
        Self::try_from_fn(|j| RingTensor::concat_rows(&parts.iter().map(|p| p.shares[j].clone()).collect::<Vec<_>>()))
    }

    pub fn broadcast_cols(&self, c: usize) -> Self {
        self.map_local(|_, s| s.broadcast_cols(c))
    }

    pub fn broadcast_rows(&self, r: usize) -> Self {
        self.map_local(|_, s| s.broadcast_rows(r))
    }

    pub fn sum_rows(&self, cfg: &FixedPointConfig) -> Self {
        self.map_local(|_, s| s.sum_rows(cfg))
    }

    pub fn sum_cols(&self, cfg: &FixedPointConfig) -> Self {
        self.map_local(|_, s| s.sum_cols(cfg))
    }

    /// Test and client helper: adds both shares together.
    pub fn reveal(&self, cfg: &FixedPointConfig) -> RingTensor {
        self.shares[0].add(&self.shares[1], cfg).expect("shares have equal shapes")
    }

    pub fn reveal_f64(&self, cfg: &FixedPointConfig) -> Vec<f64> {
        self.reveal(cfg).decode(cfg)
    }

    pub fn reveal_matrix(&self, cfg: &FixedPointConfig) -> nalgebra::DMatrix<f64> {
        self.reveal(cfg).decode_matrix(cfg)
    }
}
