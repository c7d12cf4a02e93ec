//! Fixed-point arithmetic over `Z_{2^ell}`.
//!
//! Ring elements are carried in a `u64` and reduced modulo `2^ell` after every
//! operation. Signed values use two's complement, so the most significant bit of
//! the ring is the sign bit and `1{x >= 0} = 1 - msb(x)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bit width and fractional precision shared by every element of one protocol run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RingConfig {
    ell: u32,
    frac: u32,
}

impl Default for RingConfig {
    fn default() -> Self {
        Self { ell: 64, frac: 16 }
    }
}

/// An element of `Z_{2^ell}`. The modulus lives in the [`RingConfig`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RingElement(pub u64);

impl RingElement {
    pub fn value(self) -> u64 {
        self.0
    }
}

impl From<u64> for RingElement {
    fn from(v: u64) -> Self {
        RingElement(v)
    }
}

impl RingConfig {
    pub fn new(ell: u32, frac: u32) -> Result<Self> {
        if !(8..=64).contains(&ell) {
            return Err(Error::InvalidRing(format!("ell must lie in [8, 64], got {ell}")));
        }
        if frac + 2 > ell {
            return Err(Error::InvalidRing(format!(
                "frac must be at most ell - 2 = {}, got {frac}",
                ell - 2
            )));
        }
        Ok(Self { ell, frac })
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn frac(&self) -> u32 {
        self.frac
    }

    /// `2^ell - 1`.
    #[inline]
    pub fn mask(&self) -> u64 {
        mask_bits(self.ell)
    }

    #[inline]
    pub fn reduce(&self, v: u64) -> u64 {
        v & self.mask()
    }

    #[inline]
    pub fn elem(&self, v: u64) -> RingElement {
        RingElement(self.reduce(v))
    }

    /// `2^(ell-1)`, the sign bit.
    #[inline]
    pub fn half(&self) -> u64 {
        1u64 << (self.ell - 1)
    }

    #[inline]
    pub fn add(&self, a: RingElement, b: RingElement) -> RingElement {
        RingElement(self.reduce(a.0.wrapping_add(b.0)))
    }

    #[inline]
    pub fn sub(&self, a: RingElement, b: RingElement) -> RingElement {
        RingElement(self.reduce(a.0.wrapping_sub(b.0)))
    }

    /// Plain ring product. For two fixed-point operands the result carries `2 * frac`
    /// fractional bits; truncation is a protocol-level step.
    #[inline]
    pub fn mul(&self, a: RingElement, b: RingElement) -> RingElement {
        RingElement(self.reduce(a.0.wrapping_mul(b.0)))
    }

    #[inline]
    pub fn neg(&self, a: RingElement) -> RingElement {
        RingElement(self.reduce(a.0.wrapping_neg()))
    }

    #[inline]
    pub fn msb(&self, a: RingElement) -> bool {
        (a.0 >> (self.ell - 1)) & 1 == 1
    }

    /// Two's-complement interpretation.
    #[inline]
    pub fn to_signed(&self, v: u64) -> i64 {
        let s = 64 - self.ell;
        ((v << s) as i64) >> s
    }

    #[inline]
    pub fn from_signed(&self, v: i64) -> u64 {
        self.reduce(v as u64)
    }

    /// Exclusive bound on `|x|` accepted by [`RingConfig::encode`].
    pub fn encode_bound(&self) -> f64 {
        2f64.powi(self.ell as i32 - self.frac as i32 - 1)
    }

    /// `round(x * 2^frac) mod 2^ell`. Out-of-range inputs are rejected rather than clamped.
    pub fn encode(&self, x: f64) -> Result<RingElement> {
        self.encode_scaled(x, self.frac).map(RingElement)
    }

    /// Encode with an explicit number of fractional bits.
    pub fn encode_scaled(&self, x: f64, frac: u32) -> Result<u64> {
        let bound = 2f64.powi(self.ell as i32 - frac as i32 - 1);
        if !x.is_finite() || x.abs() >= bound {
            return Err(Error::Overflow { value: x, bound });
        }
        let scaled = (x * 2f64.powi(frac as i32)).round();
        Ok(self.from_signed(scaled as i64))
    }

    pub fn decode(&self, e: RingElement) -> f64 {
        self.decode_scaled(e.0, self.frac)
    }

    pub fn decode_scaled(&self, v: u64, frac: u32) -> f64 {
        self.to_signed(v) as f64 / 2f64.powi(frac as i32)
    }
}

#[inline]
pub(crate) fn mask_bits(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(ell: u32, frac: u32) -> RingConfig {
        RingConfig::new(ell, frac).unwrap()
    }

    #[test]
    fn encode_examples() {
        assert_eq!(cfg(8, 4).encode(1.5).unwrap(), RingElement(24));
        assert_eq!(cfg(8, 4).encode(-0.25).unwrap(), RingElement(252));
        let c = cfg(16, 8);
        let e = c.encode(0.3).unwrap();
        assert_eq!(e, RingElement(77));
        assert!((c.decode(e) - 0.3).abs() <= 2f64.powi(-9));
    }

    #[test]
    fn decode_examples() {
        assert_eq!(cfg(8, 4).decode(RingElement(24)), 1.5);
        assert_eq!(cfg(8, 4).decode(RingElement(252)), -0.25);
    }

    #[test]
    fn arithmetic_examples() {
        let c = cfg(8, 4);
        assert_eq!(c.add(RingElement(200), RingElement(100)), RingElement(44));
        assert_eq!(c.mul(RingElement(24), RingElement(32)), RingElement(0));
    }

    #[test]
    fn encode_rejects_out_of_range() {
        let c = cfg(8, 4);
        // bound is 2^(8-4-1) = 8
        assert!(matches!(c.encode(8.0), Err(Error::Overflow { .. })));
        assert!(matches!(c.encode(-8.0), Err(Error::Overflow { .. })));
        assert!(c.encode(7.9).is_ok());
        assert!(c.encode(f64::NAN).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(RingConfig::new(7, 0).is_err());
        assert!(RingConfig::new(65, 0).is_err());
        assert!(RingConfig::new(8, 7).is_err());
        assert!(RingConfig::new(8, 6).is_ok());
        assert_eq!(RingConfig::default(), cfg(64, 16));
    }

    #[test]
    fn signed_roundtrip_at_full_width() {
        let c = cfg(64, 16);
        assert_eq!(c.to_signed(u64::MAX), -1);
        assert_eq!(c.from_signed(-1), u64::MAX);
        assert!(c.msb(RingElement(1 << 63)));
    }

    fn any_cfg() -> impl Strategy<Value = RingConfig> {
        (8u32..=64).prop_flat_map(|ell| (Just(ell), 0..=ell - 2)).prop_map(|(l, f)| cfg(l, f))
    }

    proptest! {
        #[test]
        fn encode_decode_error_bound(c in any_cfg(), u in -1.0f64..1.0) {
            let x = u * c.encode_bound() * 0.999;
            let e = c.encode(x).unwrap();
            let err = (c.decode(e) - x).abs();
            // f64 rounding of the product adds a relative error on top of the half-ulp bound
            prop_assert!(err <= 2f64.powi(-(c.frac() as i32) - 1) * (1.0 + 1e-9) + x.abs() * 1e-15);
        }

        #[test]
        fn group_laws(c in any_cfg(), a: u64, b: u64, d: u64) {
            let (a, b, d) = (c.elem(a), c.elem(b), c.elem(d));
            prop_assert_eq!(c.add(a, b), c.add(b, a));
            prop_assert_eq!(c.add(c.add(a, b), d), c.add(a, c.add(b, d)));
            prop_assert_eq!(c.add(a, RingElement(0)), a);
            prop_assert_eq!(c.add(a, c.neg(a)), RingElement(0));
            prop_assert_eq!(c.sub(c.add(a, b), b), a);
        }

        #[test]
        fn msb_agrees_with_real_sign(c in any_cfg(), u in -1.0f64..1.0, w in -1.0f64..1.0) {
            let bound = c.encode_bound() * 0.49;
            let (x, y) = (u * bound, w * bound);
            let (ex, ey) = (c.encode(x).unwrap(), c.encode(y).unwrap());
            let diff = c.sub(ex, ey);
            let (dx, dy) = (c.decode(ex), c.decode(ey));
            prop_assert_eq!(!c.msb(diff), dx >= dy);
        }
    }
}
