//! Two-party additive (arithmetic) and XOR (boolean) secret shares.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prf::{PrfSeed, PrfStream};
use crate::ring::{RingConfig, RingElement};

/// Party 0 is the client (query owner, output receiver); party 1 is the server.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
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

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(PartyId::P0),
            1 => Ok(PartyId::P1),
            _ => Err(Error::Config(format!("party index must be 0 or 1, got {i}"))),
        }
    }

    pub fn other(self) -> Self {
        match self {
            PartyId::P0 => PartyId::P1,
            PartyId::P1 => PartyId::P0,
        }
    }

    /// Party 0 is the one that adds public constants to its share.
    #[inline]
    pub fn is_first(self) -> bool {
        self == PartyId::P0
    }
}

/// One party's additive share: `share_0 + share_1 = secret (mod 2^ell)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArithShare {
    pub party: PartyId,
    pub wire: u64,
    pub val: RingElement,
}

/// One party's XOR share of a single bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoolShare {
    pub party: PartyId,
    pub wire: u64,
    pub bit: bool,
}

impl ArithShare {
    pub fn new(party: PartyId, wire: u64, val: RingElement) -> Self {
        Self { party, wire, val }
    }
}

impl BoolShare {
    pub fn new(party: PartyId, wire: u64, bit: bool) -> Self {
        Self { party, wire, bit }
    }
}

/// Split `secret` so that party 0's share is the PRF output named by `seed`.
///
/// When both parties hold the PRF key, party 0 derives its share locally and the
/// owner only ever materializes `secret - PRF(seed)`.
pub fn share(
    secret: RingElement,
    seed: PrfSeed,
    stream: &mut PrfStream,
    cfg: &RingConfig,
    wire: u64,
) -> Result<(ArithShare, ArithShare)> {
    let r = cfg.elem(stream.derive(seed)?);
    Ok((
        ArithShare::new(PartyId::P0, wire, r),
        ArithShare::new(PartyId::P1, wire, cfg.sub(secret, r)),
    ))
}

pub fn reconstruct(s0: ArithShare, s1: ArithShare, cfg: &RingConfig) -> Result<RingElement> {
    check_pair(s0.party, s0.wire, s1.party, s1.wire)?;
    Ok(cfg.add(s0.val, s1.val))
}

pub fn reconstruct_bool(s0: BoolShare, s1: BoolShare) -> Result<bool> {
    check_pair(s0.party, s0.wire, s1.party, s1.wire)?;
    Ok(s0.bit ^ s1.bit)
}

fn check_pair(p0: PartyId, w0: u64, p1: PartyId, w1: u64) -> Result<()> {
    if p0 == p1 {
        return Err(Error::MismatchedShares(format!("both shares belong to {p0:?}")));
    }
    if w0 != w1 {
        return Err(Error::MismatchedShares(format!("wire {w0} vs wire {w1}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prf::Prf;

    #[test]
    fn share_example_with_known_prf_output() {
        let cfg = RingConfig::new(8, 0).unwrap();
        // find a counter whose PRF output reduces to 100 mod 256
        let key = [3u8; 16];
        let prf = Prf::new(&key);
        let counter = (0..).find(|&c| prf.word(c) & 0xff == 100).unwrap();
        let mut stream = PrfStream::new(key);
        let (s0, s1) =
            share(RingElement(42), PrfSeed { key, counter }, &mut stream, &cfg, 0).unwrap();
        assert_eq!(s0.val, RingElement(100));
        assert_eq!(s1.val, RingElement(198));
        assert_eq!(reconstruct(s0, s1, &cfg).unwrap(), RingElement(42));
    }

    #[test]
    fn roundtrip_random_secrets() {
        let cfg = RingConfig::default();
        let mut stream = PrfStream::new([9; 16]);
        let mut check = PrfStream::new([1; 16]);
        for w in 0..1000 {
            let x = cfg.elem(check.next_word());
            let seed = stream.next_seed();
            let (a, b) = share(x, seed, &mut stream, &cfg, w).unwrap();
            assert_eq!(reconstruct(a, b, &cfg).unwrap(), x);
        }
    }

    #[test]
    fn seed_reuse_is_rejected() {
        let cfg = RingConfig::default();
        let mut stream = PrfStream::new([9; 16]);
        let seed = stream.next_seed();
        share(RingElement(1), seed, &mut stream, &cfg, 0).unwrap();
        assert!(matches!(
            share(RingElement(1), seed, &mut stream, &cfg, 0),
            Err(Error::SeedReuse { .. })
        ));
    }

    #[test]
    fn degenerate_share() {
        let cfg = RingConfig::new(8, 0).unwrap();
        let s0 = ArithShare::new(PartyId::P0, 3, RingElement(0));
        let s1 = ArithShare::new(PartyId::P1, 3, RingElement(77));
        assert_eq!(reconstruct(s0, s1, &cfg).unwrap(), RingElement(77));
    }

    #[test]
    fn mismatched_wires_and_parties() {
        let cfg = RingConfig::default();
        let a = ArithShare::new(PartyId::P0, 1, RingElement(0));
        let b = ArithShare::new(PartyId::P1, 2, RingElement(0));
        assert!(matches!(reconstruct(a, b, &cfg), Err(Error::MismatchedShares(_))));
        assert!(matches!(reconstruct(a, a, &cfg), Err(Error::MismatchedShares(_))));
        let x = BoolShare::new(PartyId::P0, 5, true);
        let y = BoolShare::new(PartyId::P1, 5, true);
        assert!(!reconstruct_bool(x, y).unwrap());
    }

    #[test]
    fn prf_share_monobit() {
        // party-0 shares are raw PRF output; over 10^4 draws the fraction of one bits
        // must sit well inside the 5-sigma band of a fair coin
        let cfg = RingConfig::default();
        let mut stream = PrfStream::new([0x5a; 16]);
        let draws = 10_000u64;
        let mut ones = 0u64;
        for w in 0..draws {
            let seed = stream.next_seed();
            let (s0, _) = share(RingElement(0), seed, &mut stream, &cfg, w).unwrap();
            ones += s0.val.0.count_ones() as u64;
        }
        let n = (draws * 64) as f64;
        let z = (ones as f64 - n / 2.0) / (n / 4.0).sqrt();
        assert!(z.abs() < 5.0, "monobit z-score {z}");
    }
}
