//! Secret-sharing comparison baseline: bit decomposition with a parallel prefix adder.
//!
//! Open `c = x + r` with an edaBit `r`, then `x = c - r = c + ~r + 1`. The sign bit of
//! that sum is `c[l-1] ^ ~r[l-1] ^ carry`, and the carry into the top bit is the
//! generate signal of bits `0..l-2` under `(G, P)` prefix composition, reduced as a
//! balanced tree with one round of AND gates per level.

use rand::RngCore;

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::gates::{open_ring, split};
use crate::mpc::{and_batch, AndTriple};
use crate::ring::{mask_bits, RingConfig};
use crate::share::{ArithShare, BoolShare, PartyId};
use crate::transport::{Channel, MsgKind};

/// Random `r` shared arithmetically and bit by bit, plus the AND triples of one comparison.
#[derive(Debug, PartialEq, Eq)]
pub struct EdaBits {
    pub party: PartyId,
    pub arith: u64,
    /// XOR share of the bits of `r`, bit `i` of the word is bit `i` of `r`
    pub bits: u64,
    pub ands: Vec<AndTriple>,
}

/// Tree sizes per level, starting from `ell - 1` leaves.
fn levels(ell: u32) -> Vec<usize> {
    let mut out = Vec::new();
    let mut n = ell as usize - 1;
    while n > 1 {
        out.push(n);
        n = n.div_ceil(2);
    }
    out
}

/// AND gates in one comparison: two per combine, one at the root.
pub fn and_count(ell: u32) -> usize {
    levels(ell).iter().map(|&n| if n == 2 { 1 } else { 2 * (n / 2) }).sum()
}

/// Online rounds of one comparison: the opening plus one per tree level.
pub fn rounds(ell: u32) -> usize {
    1 + levels(ell).len()
}

impl EdaBits {
    pub fn gen<R: RngCore>(cfg: &RingConfig, rng: &mut R) -> [EdaBits; 2] {
        let m = cfg.mask();
        let r = rng.next_u64() & m;
        let a = split(r, m, rng);
        let b0 = rng.next_u64() & m;
        let mut ands = [Vec::new(), Vec::new()];
        for _ in 0..and_count(cfg.ell()) {
            let [t0, t1] = AndTriple::gen(rng);
            ands[0].push(t0);
            ands[1].push(t1);
        }
        let [x0, x1] = ands;
        [
            EdaBits { party: PartyId::P0, arith: a[0], bits: b0, ands: x0 },
            EdaBits { party: PartyId::P1, arith: a[1], bits: r ^ b0, ands: x1 },
        ]
    }

    pub fn write(&self, w: &mut Writer) {
        w.u64(self.arith);
        w.u64(self.bits);
        w.u32(self.ands.len() as u32);
        for t in &self.ands {
            w.u8(t.to_bits());
        }
    }

    pub fn read(party: PartyId, r: &mut Reader) -> Result<Self> {
        let arith = r.u64()?;
        let bits = r.u64()?;
        let n = r.u32()? as usize;
        let ands = r.take(n)?.iter().map(|b| AndTriple::from_bits(*b)).collect();
        Ok(Self { party, arith, bits, ands })
    }
}

/// Batched SS dReLU. Returns XOR shares of `1{x_i >= 0}`.
pub fn ss_drelu_batch(
    ch: &mut Channel,
    cfg: &RingConfig,
    party: PartyId,
    xs: &[u64],
    aux: Vec<EdaBits>,
) -> Result<Vec<bool>> {
    let n = xs.len();
    if aux.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: aux.len() });
    }
    let ell = cfg.ell();
    let need = and_count(ell);
    if aux.iter().any(|a| a.ands.len() != need || a.party != party) {
        return Err(Error::Config(format!("edaBits must carry {need} AND triples for this party")));
    }
    let first = party == PartyId::P0;
    let masked: Vec<u64> = xs.iter().zip(&aux).map(|(x, a)| cfg.reduce(x.wrapping_add(a.arith))).collect();
    let cs = open_ring(ch, cfg, MsgKind::Reveal, masked)?;

    // leaves: (G, P) shares for bits 0..ell-2, carry-in folded into bit 0
    let mut g: Vec<Vec<bool>> = Vec::with_capacity(n);
    let mut p: Vec<Vec<bool>> = Vec::with_capacity(n);
    for (c, a) in cs.iter().zip(&aux) {
        let nr = a.bits ^ if first { mask_bits(ell) } else { 0 };
        let mut gi = Vec::with_capacity(ell as usize - 1);
        let mut pi = Vec::with_capacity(ell as usize - 1);
        for i in 0..ell - 1 {
            let ci = (c >> i) & 1 == 1;
            let ri = (nr >> i) & 1 == 1;
            gi.push(ci && ri);
            pi.push(ri ^ (ci && first));
        }
        gi[0] ^= pi[0];
        g.push(gi);
        p.push(pi);
    }

    let mut used = 0usize;
    for size in levels(ell) {
        let root = size == 2;
        let pairs = size / 2;
        let per = if root { 1 } else { 2 };
        let mut xs_and = Vec::with_capacity(n * pairs * per);
        let mut ys_and = Vec::with_capacity(n * pairs * per);
        let mut triples = Vec::with_capacity(n * pairs * per);
        for v in 0..n {
            for j in 0..pairs {
                let (lo, hi) = (2 * j, 2 * j + 1);
                xs_and.push(p[v][hi]);
                ys_and.push(g[v][lo]);
                if !root {
                    xs_and.push(p[v][hi]);
                    ys_and.push(p[v][lo]);
                }
            }
            triples.extend_from_slice(&aux[v].ands[used..used + pairs * per]);
        }
        used += pairs * per;
        let z = and_batch(ch, party, &xs_and, &ys_and, &triples)?;
        let mut k = 0;
        for v in 0..n {
            let mut ng = Vec::with_capacity(size.div_ceil(2));
            let mut np = Vec::with_capacity(size.div_ceil(2));
            for j in 0..pairs {
                ng.push(g[v][2 * j + 1] ^ z[k]);
                k += 1;
                if !root {
                    np.push(z[k]);
                    k += 1;
                }
            }
            if size % 2 == 1 {
                ng.push(g[v][size - 1]);
                np.push(p[v][size - 1]);
            }
            g[v] = ng;
            p[v] = np;
        }
    }

    let top = ell - 1;
    Ok((0..n)
        .map(|v| {
            let ct = (cs[v] >> top) & 1 == 1;
            let rt = (aux[v].bits >> top) & 1 == 1;
            g[v][0] ^ rt ^ (ct && first)
        })
        .collect())
}

pub fn ss_drelu(ch: &mut Channel, cfg: &RingConfig, x: ArithShare, aux: EdaBits) -> Result<BoolShare> {
    let v = ss_drelu_batch(ch, cfg, x.party, &[x.val.0], vec![aux])?;
    Ok(BoolShare::new(x.party, x.wire, v[0]))
}
