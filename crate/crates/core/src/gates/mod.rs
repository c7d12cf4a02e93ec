//! FSS gates in the masked-wire preprocessing model.
//!
//! Each gate has an offline key bundle per party and an online part split into a
//! local masking step, one reveal round, and a local evaluation on the public masked
//! value. Batch drivers put the reveals of all gates of one layer into a single frame.

pub mod div;
pub mod drelu;
pub mod trunc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring::RingConfig;
use crate::transport::{Channel, Message, MsgKind};

pub use div::{div_gate, div_raw_batch, DivKey, DivParams};
pub use drelu::{drelu_batch, drelu_gate, DreluKey};
pub use trunc::{trunc_batch, truncate, TruncKey};

/// Group the comparison result lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutGroup {
    /// XOR shares of a bit
    Bool,
    /// additive shares in `Z_{2^ell}`
    Arith,
}

impl OutGroup {
    pub fn bits(self, cfg: &RingConfig) -> u32 {
        match self {
            OutGroup::Bool => 1,
            OutGroup::Arith => cfg.ell(),
        }
    }

    pub fn mask(self, cfg: &RingConfig) -> u64 {
        cfg_mask(self.bits(cfg))
    }

    pub fn to_u8(self) -> u8 {
        match self {
            OutGroup::Bool => 0,
            OutGroup::Arith => 1,
        }
    }

    pub fn from_u8(b: u8) -> Result<Self> {
        match b {
            0 => Ok(OutGroup::Bool),
            1 => Ok(OutGroup::Arith),
            _ => Err(Error::DealerFile(format!("output group byte {b}"))),
        }
    }
}

fn cfg_mask(bits: u32) -> u64 {
    crate::ring::mask_bits(bits)
}

/// Dealer-side additive split of `v` under `mask`.
pub fn split<R: RngCore>(v: u64, mask: u64, rng: &mut R) -> [u64; 2] {
    let a = rng.next_u64() & mask;
    [a, v.wrapping_sub(a) & mask]
}

/// Open additively shared ring values: send own shares, return the sums.
pub fn open_ring(
    ch: &mut Channel,
    cfg: &RingConfig,
    kind: MsgKind,
    mine: Vec<u64>,
) -> Result<Vec<u64>> {
    let n = mine.len();
    let theirs = ch.exchange(kind, &Message::new(cfg.ell(), mine.clone()))?;
    if theirs.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: theirs.len() });
    }
    Ok(mine.iter().zip(&theirs.values).map(|(a, b)| cfg.reduce(a.wrapping_add(*b))).collect())
}
