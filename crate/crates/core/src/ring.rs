//! Fixed-point encoding over the ring `Z_{2^ell}`.
//!
//! Reals are scaled by `2^f`, rounded half away from zero and stored as
//! two's-complement residues. Every value lives in a `u64`; for `ell = 32`
//! the upper half is always zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ring width and fractional precision shared by every party of a session.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPointConfig {
    ell: u32,
    frac_bits: u32,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self { ell: 64, frac_bits: 16 }
    }
}

/// A single residue in `[0, 2^ell)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RingElement(pub u64);

impl FixedPointConfig {
    pub fn new(ell: u32, frac_bits: u32) -> Result<Self> {
        if ell != 32 && ell != 64 {
            return Err(Error::InvalidConfig(format!("ell must be 32 or 64, got {ell}")));
        }
        if frac_bits == 0 || frac_bits >= ell / 2 {
            return Err(Error::InvalidConfig(format!(
                "fractional bits must satisfy 0 < f < ell/2, got f={frac_bits} for ell={ell}"
            )));
        }
        Ok(Self { ell, frac_bits })
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    /// `L = 2^ell`.
    pub fn modulus(&self) -> u128 {
        1u128 << self.ell
    }

    /// Bit mask selecting the `ell` low bits.
    #[inline]
    pub fn mask(&self) -> u64 {
        if self.ell == 64 {
            u64::MAX
        } else {
            (1u64 << self.ell) - 1
        }
    }

    #[inline]
    pub fn scale(&self) -> f64 {
        (1u64 << self.frac_bits) as f64
    }

    /// Exclusive bound on encodable magnitudes, `2^(ell-f-1)`.
    pub fn bound(&self) -> f64 {
        2f64.powi((self.ell - self.frac_bits - 1) as i32)
    }

    /// Size in bytes of one ring element on the wire.
    pub fn element_bytes(&self) -> usize {
        8
    }

    #[inline]
    pub fn reduce(&self, v: u64) -> u64 {
        v & self.mask()
    }

    /// Two's-complement interpretation of a residue.
    #[inline]
    pub fn to_signed(&self, v: u64) -> i64 {
        if self.ell == 64 {
            v as i64
        } else {
            let shift = 64 - self.ell;
            ((v << shift) as i64) >> shift
        }
    }

    #[inline]
    pub fn from_signed(&self, v: i64) -> u64 {
        (v as u64) & self.mask()
    }

    pub fn encode(&self, x: f64) -> Result<RingElement> {
        let bound = self.bound();
        if !x.is_finite() || x.abs() >= bound {
            return Err(Error::Overflow { value: x, bound });
        }
        Ok(RingElement(self.encode_raw(x)))
    }

    /// Encoding without the range check. Callers guarantee `|x| < bound()`.
    #[inline]
    pub(crate) fn encode_raw(&self, x: f64) -> u64 {
        // f64::round rounds half away from zero.
        self.from_signed((x * self.scale()).round() as i64)
    }

    #[inline]
    pub fn decode(&self, e: RingElement) -> f64 {
        self.decode_raw(e.0)
    }

    #[inline]
    pub(crate) fn decode_raw(&self, v: u64) -> f64 {
        self.to_signed(v) as f64 / self.scale()
    }

    /// Uniform residue from a 64-bit random word.
    #[inline]
    pub fn sample(&self, word: u64) -> u64 {
        word & self.mask()
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        a.wrapping_add(b) & self.mask()
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        a.wrapping_sub(b) & self.mask()
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        a.wrapping_mul(b) & self.mask()
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        a.wrapping_neg() & self.mask()
    }

    /// Local share truncation by `bits`: party 0 shifts its share, party 1
    /// shifts the negation of its share. The reconstructed result equals
    /// `floor(x / 2^bits)` up to one unit, except with probability about
    /// `|x| / 2^(ell-1)`.
    #[inline]
    pub fn truncate_share(&self, party: usize, v: u64, bits: u32) -> u64 {
        if party == 0 {
            v >> bits
        } else {
            self.neg(self.neg(v) >> bits)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_examples() {
        let cfg = FixedPointConfig::default();
        assert_eq!(cfg.encode(0.0).unwrap(), RingElement(0));
        assert_eq!(cfg.encode(1.0).unwrap(), RingElement(65536));
        let neg_half = cfg.encode(-0.5).unwrap();
        assert_eq!(neg_half.0 as u128, (1u128 << 64) - 32768);
        assert_eq!(cfg.decode(neg_half), -0.5);
    }

    #[test]
    fn decode_examples() {
        let cfg = FixedPointConfig::default();
        assert_eq!(cfg.decode(RingElement(65536)), 1.0);
        assert_eq!(cfg.decode(RingElement(0)), 0.0);
        let pi = cfg.decode(cfg.encode(std::f64::consts::PI).unwrap());
        assert!((pi - std::f64::consts::PI).abs() <= 2f64.powi(-16));
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        let cfg = FixedPointConfig::default();
        let half_ulp = 0.5 / cfg.scale();
        assert_eq!(cfg.to_signed(cfg.encode(half_ulp).unwrap().0), 1);
        assert_eq!(cfg.to_signed(cfg.encode(-half_ulp).unwrap().0), -1);
    }

    #[test]
    fn overflow_is_rejected() {
        let cfg = FixedPointConfig::default();
        let bound = cfg.bound();
        assert!(matches!(cfg.encode(bound), Err(Error::Overflow { .. })));
        assert!(matches!(cfg.encode(-bound), Err(Error::Overflow { .. })));
        assert!(cfg.encode(bound - 1.0).is_ok());
        assert!(cfg.encode(f64::NAN).is_err());
    }

    #[test]
    fn invalid_configs() {
        assert!(FixedPointConfig::new(48, 16).is_err());
        assert!(FixedPointConfig::new(32, 16).is_err());
        assert!(FixedPointConfig::new(64, 0).is_err());
        let narrow = FixedPointConfig::new(32, 12).unwrap();
        assert_eq!(narrow.modulus(), 1u128 << 32);
        assert_eq!(narrow.decode(narrow.encode(-3.25).unwrap()), -3.25);
        assert!(narrow.encode(-3.25).unwrap().0 < (1u64 << 32));
    }

    #[test]
    fn truncation_of_shares() {
        let cfg = FixedPointConfig::default();
        let x = cfg.encode(-7.75).unwrap().0;
        let prod = cfg.mul(x, cfg.encode(2.0).unwrap().0);
        let r = 0x1234_5678_9abc_def0u64;
        let s0 = r;
        let s1 = cfg.sub(prod, r);
        let t = cfg.add(cfg.truncate_share(0, s0, 16), cfg.truncate_share(1, s1, 16));
        assert!((cfg.decode_raw(t) + 15.5).abs() <= 2.0 / cfg.scale());
    }
}
