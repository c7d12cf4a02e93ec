//! `1{x >= 0}` on a masked wire.
//!
//! With `x_hat = x + r`, `p = r` and `q = r + 2^(ell-1)`:
//! `1{x >= 0} = 1{x_hat < q} - 1{x_hat < p} + 1{r >= 2^(ell-1)}`.

use rand::RngCore;

use super::{open_ring, split, OutGroup};
use crate::codec::{Reader, Writer};
use crate::dcf::{dcf_gen, DcfKey, DcfParams};
use crate::error::{Error, Result};
use crate::ring::RingConfig;
use crate::share::{ArithShare, BoolShare, PartyId};
use crate::transport::{Channel, MsgKind};

#[derive(Debug, PartialEq, Eq)]
pub struct DreluKey {
    pub party: PartyId,
    pub group: OutGroup,
    /// share of the input mask `r`
    pub mask: u64,
    pub below_q: DcfKey,
    pub below_p: DcfKey,
    /// share of `1{r >= 2^(ell-1)} + r_out`
    pub offset: u64,
    /// share of the output mask `r_out`
    pub out_mask: u64,
}

impl DreluKey {
    pub fn gen<R: RngCore>(cfg: &RingConfig, group: OutGroup, rng: &mut R) -> Result<[DreluKey; 2]> {
        let r = cfg.reduce(rng.next_u64());
        let half = cfg.half();
        let q = cfg.reduce(r.wrapping_add(half));
        let om = group.mask(cfg);
        let params = DcfParams::new(cfg.ell(), group.bits(cfg), 1)?;
        let (q0, q1) = dcf_gen(params, q, &[1], rng)?;
        let (p0, p1) = dcf_gen(params, r, &[om], rng)?;
        let r_out = rng.next_u64() & om;
        let wrap = (r >= half) as u64;
        let masks = split(r, cfg.mask(), rng);
        let offs = split(wrap.wrapping_add(r_out), om, rng);
        let outs = split(r_out, om, rng);
        let mut dq = [Some(q0), Some(q1)];
        let mut dp = [Some(p0), Some(p1)];
        Ok([0, 1].map(|b| DreluKey {
            party: if b == 0 { PartyId::P0 } else { PartyId::P1 },
            group,
            mask: masks[b],
            below_q: dq[b].take().unwrap(),
            below_p: dp[b].take().unwrap(),
            offset: offs[b],
            out_mask: outs[b],
        }))
    }

    /// Share of the masked input `x + r`.
    pub fn mask_input(&self, cfg: &RingConfig, x: u64) -> u64 {
        cfg.reduce(x.wrapping_add(self.mask))
    }

    /// Share of the masked output `v_hat = 1{x >= 0} + r_out` from the public `x_hat`.
    pub fn eval_masked(&self, cfg: &RingConfig, x_hat: u64) -> u64 {
        let om = self.group.mask(cfg);
        let a = self.below_q.eval(x_hat)[0];
        let b = self.below_p.eval(x_hat)[0];
        a.wrapping_add(b).wrapping_add(self.offset) & om
    }

    /// Strip the output mask locally: share of `1{x >= 0}`.
    pub fn unmask(&self, cfg: &RingConfig, v_hat: u64) -> u64 {
        v_hat.wrapping_sub(self.out_mask) & self.group.mask(cfg)
    }

    pub fn write(&self, w: &mut Writer) {
        w.u8(self.party.index() as u8);
        w.u8(self.group.to_u8());
        w.u64(self.mask);
        w.u64(self.offset);
        w.u64(self.out_mask);
        self.below_q.write(w);
        self.below_p.write(w);
    }

    pub fn read(r: &mut Reader) -> Result<DreluKey> {
        let party = PartyId::from_index(r.u8()? as usize)
            .map_err(|e| Error::DealerFile(e.to_string()))?;
        let group = OutGroup::from_u8(r.u8()?)?;
        let mask = r.u64()?;
        let offset = r.u64()?;
        let out_mask = r.u64()?;
        let below_q = DcfKey::read(r)?;
        let below_p = DcfKey::read(r)?;
        Ok(DreluKey { party, group, mask, below_q, below_p, offset, out_mask })
    }
}

/// Batched dReLU: one reveal round of `ell` bits per gate and party, then local
/// evaluation. Returns shares of `1{x_i >= 0}` in each key's output group.
pub fn drelu_batch(
    ch: &mut Channel,
    cfg: &RingConfig,
    xs: &[u64],
    keys: Vec<DreluKey>,
) -> Result<Vec<u64>> {
    use rayon::prelude::*;
    if xs.len() != keys.len() {
        return Err(Error::LengthMismatch { expected: keys.len(), got: xs.len() });
    }
    let masked: Vec<u64> = xs.iter().zip(&keys).map(|(x, k)| k.mask_input(cfg, *x)).collect();
    let hats = open_ring(ch, cfg, MsgKind::Reveal, masked)?;
    Ok(keys
        .par_iter()
        .zip(hats.par_iter())
        .map(|(k, h)| k.unmask(cfg, k.eval_masked(cfg, *h)))
        .collect())
}

/// Single dReLU gate with boolean output.
pub fn drelu_gate(ch: &mut Channel, cfg: &RingConfig, x: ArithShare, key: DreluKey) -> Result<BoolShare> {
    if key.group != OutGroup::Bool {
        return Err(Error::Config("drelu_gate needs a boolean-output key".into()));
    }
    if key.party != x.party {
        return Err(Error::MismatchedShares("key and share belong to different parties".into()));
    }
    let v = drelu_batch(ch, cfg, &[x.val.0], vec![key])?;
    Ok(BoolShare::new(x.party, x.wire, v[0] == 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn local(cfg: &RingConfig, x: u64, keys: &[DreluKey; 2], rng: &mut ChaCha20Rng) -> u64 {
        let om = keys[0].group.mask(cfg);
        let s = split(x, cfg.mask(), rng);
        let hat = cfg.reduce(keys[0].mask_input(cfg, s[0]).wrapping_add(keys[1].mask_input(cfg, s[1])));
        let v0 = keys[0].unmask(cfg, keys[0].eval_masked(cfg, hat));
        let v1 = keys[1].unmask(cfg, keys[1].eval_masked(cfg, hat));
        v0.wrapping_add(v1) & om
    }

    #[test]
    fn exhaustive_ell8_twenty_masks() {
        let cfg = RingConfig::new(8, 0).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for group in [OutGroup::Bool, OutGroup::Arith] {
            for _ in 0..20 {
                let keys = DreluKey::gen(&cfg, group, &mut rng).unwrap();
                for x in 0..256u64 {
                    assert_eq!(local(&cfg, x, &keys, &mut rng), !cfg.msb(cfg.elem(x)) as u64, "x={x}");
                }
            }
        }
    }

    #[test]
    fn zero_and_negative_through_channel() {
        let cfg = RingConfig::default();
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let xs = [cfg.encode(0.0).unwrap().0, cfg.encode(-0.1).unwrap().0];
        let shares: Vec<[u64; 2]> = xs.iter().map(|x| split(*x, cfg.mask(), &mut rng)).collect();
        let mut k0 = Vec::new();
        let mut k1 = Vec::new();
        for _ in 0..2 {
            let [a, b] = DreluKey::gen(&cfg, OutGroup::Bool, &mut rng).unwrap();
            k0.push(a);
            k1.push(b);
        }
        let (mut c0, mut c1) = crate::transport::channel_pair();
        let s1: Vec<u64> = shares.iter().map(|s| s[1]).collect();
        let h = std::thread::spawn(move || {
            let out = drelu_batch(&mut c1, &cfg, &s1, k1).unwrap();
            (out, c1.transcript())
        });
        let s0: Vec<u64> = shares.iter().map(|s| s[0]).collect();
        let v0 = drelu_batch(&mut c0, &cfg, &s0, k0).unwrap();
        let (v1, t1) = h.join().unwrap();
        assert_eq!(v0[0] ^ v1[0], 1);
        assert_eq!(v0[1] ^ v1[1], 0);
        let t = crate::transport::Transcript::merge(&c0.transcript(), &t1);
        assert_eq!(t.rounds(), 1);
        assert_eq!(t.payload_bits(PartyId::P0), 2 * 64);
    }

    #[test]
    fn key_serialization_roundtrip() {
        let cfg = RingConfig::new(16, 4).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let [k, _] = DreluKey::gen(&cfg, OutGroup::Arith, &mut rng).unwrap();
        let mut w = Writer::new();
        k.write(&mut w);
        assert_eq!(DreluKey::read(&mut Reader::new(&w.buf)).unwrap(), k);
    }
}
