//! Exact signed truncation `floor(x / 2^t)` on a masked wire.
//!
//! Shift to the unsigned range with `x_pos = x + 2^(ell-1)`. For public
//! `x_hat_pos = x_pos + r`, split into `hi = x_hat_pos >> t`, `lo = x_hat_pos mod 2^t`:
//!
//! ```text
//! floor(x_pos / 2^t) = hi - (r >> t) - 1{lo < r mod 2^t} + 2^(ell-t) * 1{x_hat_pos < r}
//! ```
//!
//! and subtract `2^(ell-1-t)` at the end. Both indicators are DCFs.

use rand::RngCore;

use super::{open_ring, split};
use crate::codec::{Reader, Writer};
use crate::dcf::{dcf_gen, DcfKey, DcfParams};
use crate::error::{Error, Result};
use crate::ring::{mask_bits, RingConfig};
use crate::share::{ArithShare, PartyId};
use crate::transport::{Channel, MsgKind};

#[derive(Debug, PartialEq, Eq)]
pub struct TruncKey {
    pub party: PartyId,
    pub shift: u32,
    /// share of `r`
    pub mask: u64,
    /// share of `r >> shift`
    pub mask_hi: u64,
    /// `2^(ell-shift) * 1{x_hat_pos < r}`
    pub wrap: DcfKey,
    /// `-1{lo < r mod 2^shift}`
    pub borrow: DcfKey,
}

impl TruncKey {
    pub fn gen<R: RngCore>(cfg: &RingConfig, shift: u32, rng: &mut R) -> Result<[TruncKey; 2]> {
        Self::gen_with_mask(cfg, shift, cfg.reduce(rng.next_u64()), rng)
    }

    /// Key pair for a caller-chosen mask, so that one revealed wire can feed several gates.
    pub fn gen_with_mask<R: RngCore>(
        cfg: &RingConfig,
        shift: u32,
        r: u64,
        rng: &mut R,
    ) -> Result<[TruncKey; 2]> {
        let ell = cfg.ell();
        if shift == 0 || shift >= ell {
            return Err(Error::Config(format!("truncation shift {shift} outside [1, {}]", ell - 1)));
        }
        let (w0, w1) = dcf_gen(DcfParams::new(ell, ell, 1)?, r, &[1u64 << (ell - shift)], rng)?;
        let (b0, b1) = dcf_gen(
            DcfParams::new(shift, ell, 1)?,
            r & mask_bits(shift),
            &[cfg.mask()],
            rng,
        )?;
        let masks = split(r, cfg.mask(), rng);
        let his = split(r >> shift, cfg.mask(), rng);
        let mut wk = [Some(w0), Some(w1)];
        let mut bk = [Some(b0), Some(b1)];
        Ok([0, 1].map(|b| TruncKey {
            party: if b == 0 { PartyId::P0 } else { PartyId::P1 },
            shift,
            mask: masks[b],
            mask_hi: his[b],
            wrap: wk[b].take().unwrap(),
            borrow: bk[b].take().unwrap(),
        }))
    }

    pub fn mask_input(&self, cfg: &RingConfig, x: u64) -> u64 {
        cfg.reduce(x.wrapping_add(self.mask))
    }

    /// Share of `floor(x / 2^shift)`, or of `round(x / 2^shift)` (half up) when `round`.
    pub fn eval(&self, cfg: &RingConfig, x_hat: u64, round: bool) -> u64 {
        let t = self.shift;
        let mut pos = x_hat.wrapping_add(cfg.half());
        if round {
            pos = pos.wrapping_add(1 << (t - 1));
        }
        let pos = cfg.reduce(pos);
        let hi = pos >> t;
        let lo = pos & mask_bits(t);
        let mut acc = self.wrap.eval(pos)[0]
            .wrapping_add(self.borrow.eval(lo)[0])
            .wrapping_sub(self.mask_hi);
        if self.party == PartyId::P0 {
            acc = acc.wrapping_add(hi).wrapping_sub(1u64 << (cfg.ell() - 1 - t));
        }
        cfg.reduce(acc)
    }

    pub fn write(&self, w: &mut Writer) {
        w.u8(self.party.index() as u8);
        w.u8(self.shift as u8);
        w.u64(self.mask);
        w.u64(self.mask_hi);
        self.wrap.write(w);
        self.borrow.write(w);
    }

    pub fn read(r: &mut Reader) -> Result<TruncKey> {
        let party = PartyId::from_index(r.u8()? as usize)
            .map_err(|e| Error::DealerFile(e.to_string()))?;
        let shift = r.u8()? as u32;
        let mask = r.u64()?;
        let mask_hi = r.u64()?;
        let wrap = DcfKey::read(r)?;
        let borrow = DcfKey::read(r)?;
        if shift == 0 || borrow.params.in_bits != shift {
            return Err(Error::DealerFile(format!("inconsistent truncation shift {shift}")));
        }
        Ok(TruncKey { party, shift, mask, mask_hi, wrap, borrow })
    }
}

/// Batched truncation: one reveal round, then local DCF evaluation.
pub fn trunc_batch(
    ch: &mut Channel,
    cfg: &RingConfig,
    xs: &[u64],
    keys: Vec<TruncKey>,
    round: bool,
) -> Result<Vec<u64>> {
    use rayon::prelude::*;
    if xs.len() != keys.len() {
        return Err(Error::LengthMismatch { expected: keys.len(), got: xs.len() });
    }
    let masked: Vec<u64> = xs.iter().zip(&keys).map(|(x, k)| k.mask_input(cfg, *x)).collect();
    let hats = open_ring(ch, cfg, MsgKind::Reveal, masked)?;
    Ok(keys.par_iter().zip(hats.par_iter()).map(|(k, h)| k.eval(cfg, *h, round)).collect())
}

/// Truncate one shared value by the key's shift.
pub fn truncate(ch: &mut Channel, cfg: &RingConfig, x: ArithShare, key: TruncKey) -> Result<ArithShare> {
    let v = trunc_batch(ch, cfg, &[x.val.0], vec![key], false)?;
    Ok(ArithShare::new(x.party, x.wire, cfg.elem(v[0])))
}
