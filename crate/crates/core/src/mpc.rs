//! Dealer-assisted arithmetic and boolean multiplication, and daBit conversion.

use rand::{Rng, RngCore};

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::gates::{split, trunc_batch, TruncKey};
use crate::ring::RingConfig;
use crate::share::{ArithShare, BoolShare, PartyId};
use crate::transport::{Channel, Message, MsgKind};

fn parties() -> [PartyId; 2] {
    [PartyId::P0, PartyId::P1]
}

/// Shares of random `a`, `b` and `c = a * b`.
#[derive(Debug, PartialEq, Eq)]
pub struct BeaverTriple {
    pub party: PartyId,
    pub a: u64,
    pub b: u64,
    pub c: u64,
}

impl BeaverTriple {
    pub fn gen<R: RngCore>(cfg: &RingConfig, rng: &mut R) -> [BeaverTriple; 2] {
        let m = cfg.mask();
        let (a, b) = (rng.next_u64() & m, rng.next_u64() & m);
        let (sa, sb, sc) = (split(a, m, rng), split(b, m, rng), split(a.wrapping_mul(b), m, rng));
        [0, 1].map(|i| BeaverTriple { party: parties()[i], a: sa[i], b: sb[i], c: sc[i] })
    }

    /// Share of `x * y` from the opened `d = x - a`, `e = y - b`.
    #[inline]
    pub fn finish(&self, cfg: &RingConfig, d: u64, e: u64) -> u64 {
        let mut z = self.c.wrapping_add(d.wrapping_mul(self.b)).wrapping_add(e.wrapping_mul(self.a));
        if self.party == PartyId::P0 {
            z = z.wrapping_add(d.wrapping_mul(e));
        }
        cfg.reduce(z)
    }

    pub fn write(&self, w: &mut Writer) {
        w.u64(self.a);
        w.u64(self.b);
        w.u64(self.c);
    }

    pub fn read(party: PartyId, r: &mut Reader) -> Result<Self> {
        Ok(Self { party, a: r.u64()?, b: r.u64()?, c: r.u64()? })
    }
}

/// Batched Beaver multiplication: one round, `2 * ell` bits per product and party.
pub fn beaver_mul_batch(
    ch: &mut Channel,
    cfg: &RingConfig,
    xs: &[u64],
    ys: &[u64],
    triples: Vec<BeaverTriple>,
) -> Result<Vec<u64>> {
    let n = triples.len();
    if xs.len() != n || ys.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: xs.len().min(ys.len()) });
    }
    let mut msg = Vec::with_capacity(2 * n);
    for ((x, y), t) in xs.iter().zip(ys).zip(&triples) {
        msg.push(cfg.reduce(x.wrapping_sub(t.a)));
        msg.push(cfg.reduce(y.wrapping_sub(t.b)));
    }
    let opened = crate::gates::open_ring(ch, cfg, MsgKind::Beaver, msg)?;
    Ok(triples
        .iter()
        .enumerate()
        .map(|(i, t)| t.finish(cfg, opened[2 * i], opened[2 * i + 1]))
        .collect())
}

pub fn beaver_mul(
    ch: &mut Channel,
    cfg: &RingConfig,
    x: ArithShare,
    y: ArithShare,
    t: BeaverTriple,
) -> Result<ArithShare> {
    if x.party != y.party || x.party != t.party {
        return Err(Error::MismatchedShares("operands and triple from different parties".into()));
    }
    let z = beaver_mul_batch(ch, cfg, &[x.val.0], &[y.val.0], vec![t])?;
    Ok(ArithShare::new(x.party, x.wire, cfg.elem(z[0])))
}

/// Inner-product correlation: vectors `a`, `b` and `c = <a, b>`.
#[derive(Debug, PartialEq, Eq)]
pub struct DotTriple {
    pub party: PartyId,
    pub a: Vec<u64>,
    pub b: Vec<u64>,
    pub c: u64,
}

impl DotTriple {
    pub fn gen<R: RngCore>(cfg: &RingConfig, n: usize, rng: &mut R) -> [DotTriple; 2] {
        let m = cfg.mask();
        let a: Vec<u64> = (0..n).map(|_| rng.next_u64() & m).collect();
        let b: Vec<u64> = (0..n).map(|_| rng.next_u64() & m).collect();
        let c = a.iter().zip(&b).fold(0u64, |s, (x, y)| s.wrapping_add(x.wrapping_mul(*y)));
        let sa: Vec<[u64; 2]> = a.iter().map(|v| split(*v, m, rng)).collect();
        let sb: Vec<[u64; 2]> = b.iter().map(|v| split(*v, m, rng)).collect();
        let sc = split(c, m, rng);
        [0, 1].map(|i| DotTriple {
            party: parties()[i],
            a: sa.iter().map(|s| s[i]).collect(),
            b: sb.iter().map(|s| s[i]).collect(),
            c: sc[i],
        })
    }
}

/// Shares of `sum x_i * y_i` truncated by the key's shift: one Beaver round with every
/// opening in one frame, then one truncation round.
pub fn dot_product_shares(
    ch: &mut Channel,
    cfg: &RingConfig,
    xs: &[ArithShare],
    ys: &[ArithShare],
    triple: DotTriple,
    trunc: TruncKey,
) -> Result<ArithShare> {
    let n = triple.a.len();
    if xs.len() != n || ys.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: if xs.len() != n { xs.len() } else { ys.len() } });
    }
    let party = triple.party;
    let mut msg = Vec::with_capacity(2 * n);
    for i in 0..n {
        msg.push(cfg.reduce(xs[i].val.0.wrapping_sub(triple.a[i])));
        msg.push(cfg.reduce(ys[i].val.0.wrapping_sub(triple.b[i])));
    }
    let opened = crate::gates::open_ring(ch, cfg, MsgKind::Beaver, msg)?;
    let mut acc = triple.c;
    for i in 0..n {
        let (d, e) = (opened[2 * i], opened[2 * i + 1]);
        acc = acc
            .wrapping_add(d.wrapping_mul(triple.b[i]))
            .wrapping_add(e.wrapping_mul(triple.a[i]));
        if party == PartyId::P0 {
            acc = acc.wrapping_add(d.wrapping_mul(e));
        }
    }
    let t = trunc_batch(ch, cfg, &[cfg.reduce(acc)], vec![trunc], false)?;
    Ok(ArithShare::new(party, xs.first().map_or(0, |x| x.wire), cfg.elem(t[0])))
}

/// Boolean Beaver triple `c = a AND b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AndTriple {
    pub a: bool,
    pub b: bool,
    pub c: bool,
}

impl AndTriple {
    pub fn gen<R: RngCore>(rng: &mut R) -> [AndTriple; 2] {
        let (a, b): (bool, bool) = (rng.gen(), rng.gen());
        let (a0, b0, c0): (bool, bool, bool) = (rng.gen(), rng.gen(), rng.gen());
        [AndTriple { a: a0, b: b0, c: c0 }, AndTriple { a: a ^ a0, b: b ^ b0, c: (a & b) ^ c0 }]
    }

    pub fn to_bits(self) -> u8 {
        self.a as u8 | (self.b as u8) << 1 | (self.c as u8) << 2
    }

    pub fn from_bits(v: u8) -> Self {
        Self { a: v & 1 == 1, b: v & 2 == 2, c: v & 4 == 4 }
    }
}

/// Batched AND gates: one round, 2 bits per gate and party.
pub fn and_batch(
    ch: &mut Channel,
    party: PartyId,
    xs: &[bool],
    ys: &[bool],
    triples: &[AndTriple],
) -> Result<Vec<bool>> {
    let n = triples.len();
    if xs.len() != n || ys.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: xs.len().min(ys.len()) });
    }
    let mut msg = Vec::with_capacity(2 * n);
    for ((x, y), t) in xs.iter().zip(ys).zip(triples) {
        msg.push(x ^ t.a);
        msg.push(y ^ t.b);
    }
    let theirs = ch.exchange(MsgKind::And, &Message::bits(msg.clone()))?;
    if theirs.len() != 2 * n {
        return Err(Error::LengthMismatch { expected: 2 * n, got: theirs.len() });
    }
    Ok(triples
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let d = msg[2 * i] ^ (theirs.values[2 * i] == 1);
            let e = msg[2 * i + 1] ^ (theirs.values[2 * i + 1] == 1);
            t.c ^ (d & t.b) ^ (e & t.a) ^ (party == PartyId::P0 && d & e)
        })
        .collect())
}

/// A random bit shared both as XOR and as additive shares.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DaBit {
    pub bit: bool,
    pub arith: u64,
}

impl DaBit {
    pub fn gen<R: RngCore>(cfg: &RingConfig, rng: &mut R) -> [DaBit; 2] {
        let b: bool = rng.gen();
        let b0: bool = rng.gen();
        let a = split(b as u64, cfg.mask(), rng);
        [DaBit { bit: b0, arith: a[0] }, DaBit { bit: b ^ b0, arith: a[1] }]
    }
}

/// Boolean to arithmetic shares: open `c = v xor b` (1 bit per party), then
/// `v = c + b - 2cb` with `b` taken from the daBit's arithmetic side.
pub fn b2a_batch(
    ch: &mut Channel,
    cfg: &RingConfig,
    party: PartyId,
    vs: &[bool],
    aux: &[DaBit],
) -> Result<Vec<u64>> {
    if vs.len() != aux.len() {
        return Err(Error::LengthMismatch { expected: aux.len(), got: vs.len() });
    }
    let mine: Vec<bool> = vs.iter().zip(aux).map(|(v, d)| v ^ d.bit).collect();
    let theirs = ch.exchange(MsgKind::Convert, &Message::bits(mine.clone()))?;
    if theirs.len() != vs.len() {
        return Err(Error::LengthMismatch { expected: vs.len(), got: theirs.len() });
    }
    Ok(mine
        .iter()
        .zip(&theirs.values)
        .zip(aux)
        .map(|((m, t), d)| {
            let c = *m ^ (*t == 1);
            let v = if c { d.arith.wrapping_neg() } else { d.arith };
            cfg.reduce(if c && party == PartyId::P0 { v.wrapping_add(1) } else { v })
        })
        .collect())
}

pub fn b2a(ch: &mut Channel, cfg: &RingConfig, v: BoolShare, aux: DaBit) -> Result<ArithShare> {
    let out = b2a_batch(ch, cfg, v.party, &[v.bit], &[aux])?;
    Ok(ArithShare::new(v.party, v.wire, cfg.elem(out[0])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::{channel_pair, Transcript};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    /// Run the same closure as both parties over an in-memory channel pair.
    fn two_party<T: Send + 'static>(
        f0: impl FnOnce(&mut Channel) -> T + Send + 'static,
        f1: impl FnOnce(&mut Channel) -> T + Send + 'static,
    ) -> (T, T, Transcript) {
        let (mut c0, mut c1) = channel_pair();
        let h = std::thread::spawn(move || {
            let r = f1(&mut c1);
            (r, c1.transcript())
        });
        let r0 = f0(&mut c0);
        let (r1, t1) = h.join().unwrap();
        (r0, r1, Transcript::merge(&c0.transcript(), &t1))
    }

    #[test]
    fn beaver_oracle_loop() {
        let cfg = RingConfig::default();
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        let n = 1000;
        let xs: Vec<u64> = (0..n).map(|_| rng.next_u64()).collect();
        let ys: Vec<u64> = (0..n).map(|_| rng.next_u64()).collect();
        let (mut p0, mut p1) = (Vec::new(), Vec::new());
        let (mut t0, mut t1) = (Vec::new(), Vec::new());
        for i in 0..n {
            let (sx, sy) = (split(xs[i], cfg.mask(), &mut rng), split(ys[i], cfg.mask(), &mut rng));
            p0.push((sx[0], sy[0]));
            p1.push((sx[1], sy[1]));
            let [a, b] = BeaverTriple::gen(&cfg, &mut rng);
            t0.push(a);
            t1.push(b);
        }
        let run = |p: Vec<(u64, u64)>, t: Vec<BeaverTriple>| {
            move |ch: &mut Channel| {
                let (x, y): (Vec<u64>, Vec<u64>) = p.into_iter().unzip();
                beaver_mul_batch(ch, &RingConfig::default(), &x, &y, t).unwrap()
            }
        };
        let (z0, z1, tr) = two_party(run(p0, t0), run(p1, t1));
        for i in 0..n {
            assert_eq!(z0[i].wrapping_add(z1[i]), xs[i].wrapping_mul(ys[i]));
        }
        assert_eq!(tr.rounds(), 1);
        assert_eq!(tr.payload_bits(PartyId::P0), 2 * 64 * n as u64);
    }

    #[test]
    fn beaver_small_examples() {
        let cfg = RingConfig::new(16, 0).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(32);
        for (x, y, want) in [(3u64, 5u64, 15u64), (0, 12345, 0)] {
            let (sx, sy) = (split(x, cfg.mask(), &mut rng), split(y, cfg.mask(), &mut rng));
            let [ta, tb] = BeaverTriple::gen(&cfg, &mut rng);
            let (z0, z1, _) = two_party(
                move |ch| {
                    let c = RingConfig::new(16, 0).unwrap();
                    let a = ArithShare::new(PartyId::P0, 0, c.elem(sx[0]));
                    let b = ArithShare::new(PartyId::P0, 0, c.elem(sy[0]));
                    beaver_mul(ch, &c, a, b, ta).unwrap().val.0
                },
                move |ch| {
                    let c = RingConfig::new(16, 0).unwrap();
                    let a = ArithShare::new(PartyId::P1, 0, c.elem(sx[1]));
                    let b = ArithShare::new(PartyId::P1, 0, c.elem(sy[1]));
                    beaver_mul(ch, &c, a, b, tb).unwrap().val.0
                },
            );
            assert_eq!(cfg.reduce(z0 + z1), want);
        }
    }

    fn dot_case(x: Vec<f64>, y: Vec<f64>, seed: u64) -> f64 {
        let cfg = RingConfig::default();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let n = x.len();
        let sx: Vec<[u64; 2]> = x.iter().map(|v| split(cfg.encode(*v).unwrap().0, cfg.mask(), &mut rng)).collect();
        let sy: Vec<[u64; 2]> = y.iter().map(|v| split(cfg.encode(*v).unwrap().0, cfg.mask(), &mut rng)).collect();
        let [d0, d1] = DotTriple::gen(&cfg, n, &mut rng);
        let [k0, k1] = TruncKey::gen(&cfg, cfg.frac(), &mut rng).unwrap();
        let side = |i: usize, d: DotTriple, k: TruncKey| {
            let p = parties()[i];
            let xs: Vec<ArithShare> = sx.iter().map(|s| ArithShare::new(p, 0, cfg.elem(s[i]))).collect();
            let ys: Vec<ArithShare> = sy.iter().map(|s| ArithShare::new(p, 0, cfg.elem(s[i]))).collect();
            move |ch: &mut Channel| dot_product_shares(ch, &RingConfig::default(), &xs, &ys, d, k).unwrap().val.0
        };
        let (a, b, t) = two_party(side(0, d0, k0), side(1, d1, k1));
        assert_eq!(t.rounds(), 2);
        cfg.decode(cfg.elem(a.wrapping_add(b)))
    }

    #[test]
    fn dot_product_examples() {
        assert!((dot_case(vec![1.0, 0.0], vec![0.5, 2.0], 33) - 0.5).abs() <= 2f64.powi(-16));
        assert_eq!(dot_case(vec![0.0; 4], vec![0.3, -1.0, 2.0, 0.1], 34), 0.0);
        let mut rng = ChaCha20Rng::seed_from_u64(35);
        let x: Vec<f64> = (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sq: f64 = x.iter().map(|v| v * v).sum();
        let got = dot_case(x.clone(), x, 36);
        // each encoded coordinate is off by at most 2^-17; 32 terms plus one truncation ulp
        assert!((got - sq).abs() < 32.0 * 2.0 * 2f64.powi(-17) + 2f64.powi(-16));
    }

    #[test]
    fn dot_product_length_mismatch() {
        let cfg = RingConfig::default();
        let mut rng = ChaCha20Rng::seed_from_u64(37);
        let [d0, _] = DotTriple::gen(&cfg, 3, &mut rng);
        let [k0, _] = TruncKey::gen(&cfg, 16, &mut rng).unwrap();
        let (mut c0, _c1) = channel_pair();
        let xs = vec![ArithShare::new(PartyId::P0, 0, cfg.elem(0)); 2];
        assert!(matches!(
            dot_product_shares(&mut c0, &cfg, &xs, &xs, d0, k0),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn and_gates_truth_table() {
        let mut rng = ChaCha20Rng::seed_from_u64(38);
        let mut cases = Vec::new();
        for x in [false, true] {
            for y in [false, true] {
                for _ in 0..4 {
                    let (x0, y0): (bool, bool) = (rng.gen(), rng.gen());
                    cases.push((x, y, x0, y0, AndTriple::gen(&mut rng)));
                }
            }
        }
        let c0: Vec<_> = cases.iter().map(|c| (c.2, c.3, c.4[0])).collect();
        let c1: Vec<_> = cases.iter().map(|c| (c.0 ^ c.2, c.1 ^ c.3, c.4[1])).collect();
        let run = |p: PartyId, c: Vec<(bool, bool, AndTriple)>| {
            move |ch: &mut Channel| {
                let xs: Vec<bool> = c.iter().map(|v| v.0).collect();
                let ys: Vec<bool> = c.iter().map(|v| v.1).collect();
                let ts: Vec<AndTriple> = c.iter().map(|v| v.2).collect();
                and_batch(ch, p, &xs, &ys, &ts).unwrap()
            }
        };
        let (z0, z1, t) = two_party(run(PartyId::P0, c0), run(PartyId::P1, c1));
        for (i, c) in cases.iter().enumerate() {
            assert_eq!(z0[i] ^ z1[i], c.0 & c.1);
        }
        assert_eq!(t.payload_bits(PartyId::P0), 2 * cases.len() as u64);
    }

    #[test]
    fn b2a_eight_case_table() {
        // every (v, share pattern, daBit bit) combination
        let cfg = RingConfig::default();
        let mut rng = ChaCha20Rng::seed_from_u64(39);
        let mut cases = Vec::new();
        for v in [false, true] {
            for s0 in [false, true] {
                for b in [false, true] {
                    let b0: bool = rng.gen();
                    let a = split(b as u64, cfg.mask(), &mut rng);
                    cases.push((v, s0, [DaBit { bit: b0, arith: a[0] }, DaBit { bit: b ^ b0, arith: a[1] }]));
                }
            }
        }
        assert_eq!(cases.len(), 8);
        let side = |i: usize| {
            let vs: Vec<bool> = cases.iter().map(|c| if i == 0 { c.1 } else { c.0 ^ c.1 }).collect();
            let aux: Vec<DaBit> = cases.iter().map(|c| c.2[i]).collect();
            move |ch: &mut Channel| b2a_batch(ch, &RingConfig::default(), parties()[i], &vs, &aux).unwrap()
        };
        let (a0, a1, t) = two_party(side(0), side(1));
        for (i, c) in cases.iter().enumerate() {
            assert_eq!(a0[i].wrapping_add(a1[i]), c.0 as u64, "case {i}");
        }
        assert_eq!(t.rounds(), 1);
        assert_eq!(t.payload_bits(PartyId::P1), 8);
    }

    #[test]
    fn b2a_single_bits() {
        let cfg = RingConfig::default();
        let mut rng = ChaCha20Rng::seed_from_u64(40);
        for v in [true, false] {
            let d = DaBit::gen(&cfg, &mut rng);
            let (x, y, _) = two_party(
                move |ch| b2a(ch, &RingConfig::default(), BoolShare::new(PartyId::P0, 0, true), d[0]).unwrap(),
                move |ch| b2a(ch, &RingConfig::default(), BoolShare::new(PartyId::P1, 0, !v), d[1]).unwrap(),
            );
            assert_eq!(x.val.0.wrapping_add(y.val.0), v as u64);
        }
    }
}
