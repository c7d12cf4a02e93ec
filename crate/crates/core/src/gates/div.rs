//! Fixed-point division `c = y / z` for `z` in `[2^K_MIN, 2^K_MAX)`.
//!
//! Rounds, all batched across gates:
//!
//! 1. reveal `z_hat` (and `y_hat` when `y` needs truncating); truncate `y`, `z` locally
//!    and read an affine-spline estimate `w0 ~ 1/z` off the top bits of `z_hat`
//! 2. Beaver: `n0 = y * w0`, `d0 = z * w0` (one triple sharing `b = w0`)
//! 3. truncate `n0`, `d0`
//! 4. Beaver: `c = n0 * (2 - d0)`
//!
//! The spline has `PIECES` minimax pieces per octave. Its input is
//! `u = (z_hat mod 2^k) >> t`, which equals `(z >> t) + r_u` (mod `2^d`) up to a carry,
//! so the dealer moves every breakpoint by the secret `r_u` and hands out one DCF per
//! breakpoint with the coefficient jump as a two-lane payload. The relative error
//! `e` of `w0` becomes `e^2` after the Newton step.

use rand::RngCore;
use rayon::prelude::*;

use super::{open_ring, split, trunc::TruncKey};
use crate::codec::{Reader, Writer};
use crate::dcf::{dcf_gen, DcfKey, DcfParams};
use crate::error::{Error, Result};
use crate::mpc::{beaver_mul_batch, BeaverTriple};
use crate::ring::{mask_bits, RingConfig};
use crate::share::{ArithShare, PartyId};
use crate::transport::{Channel, MsgKind};

pub const K_MIN: i32 = -4;
pub const K_MAX: i32 = 4;
pub const PIECES: u32 = 8;
/// fractional bits of the spline input
const ZH_FRAC: u32 = 16;
/// integer headroom bits for the quotient
const HEADROOM: u32 = 7;

/// Number of spline DCF keys per gate.
pub fn spline_keys() -> usize {
    ((K_MAX - K_MIN) as u32 * PIECES) as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DivParams {
    pub ell: u32,
    /// ring fractional bits
    pub frac: u32,
    /// fractional bits of the inputs `y`, `z`
    pub in_frac: u32,
}

impl DivParams {
    pub fn new(cfg: &RingConfig, in_frac: u32) -> Result<Self> {
        let p = Self { ell: cfg.ell(), frac: cfg.frac(), in_frac };
        if in_frac == 0 || p.k_bits() + 1 > p.ell {
            return Err(Error::Config(format!(
                "division inputs with {in_frac} fractional bits do not fit a {}-bit ring",
                p.ell
            )));
        }
        let need = p.zh_frac() + 2 * K_MAX as u32 + 10;
        if p.ell < HEADROOM + 1 + p.y_frac() + need {
            return Err(Error::Config(format!(
                "division needs ell >= {} for {in_frac} input fractional bits",
                HEADROOM + 1 + p.y_frac() + need
            )));
        }
        if p.f3() < p.frac + 4 {
            return Err(Error::Config("division intermediate precision below frac + 4".into()));
        }
        Ok(p)
    }

    pub fn zh_frac(&self) -> u32 {
        ZH_FRAC.min(self.in_frac)
    }

    /// bits dropped from `z_hat mod 2^k` to form the spline input
    pub fn u_shift(&self) -> u32 {
        self.in_frac - self.zh_frac()
    }

    pub fn k_bits(&self) -> u32 {
        (self.in_frac as i32 + K_MAX + 1) as u32
    }

    /// spline input width
    pub fn d_bits(&self) -> u32 {
        self.k_bits() - self.u_shift()
    }

    pub fn y_frac(&self) -> u32 {
        self.in_frac.min(self.frac + 4)
    }

    pub fn w_frac(&self) -> u32 {
        self.ell - 1 - HEADROOM - self.y_frac()
    }

    /// fractional bits after the first truncation
    pub fn f3(&self) -> u32 {
        (self.ell - HEADROOM - 2) / 2
    }

    /// fractional bits of the raw quotient
    pub fn out_frac(&self) -> u32 {
        2 * self.f3()
    }

    fn needs_input_trunc(&self) -> bool {
        self.y_frac() < self.in_frac
    }
}

/// `B_1 .. B_{J-1}`: interior piece boundaries at `zh_frac` fractional bits.
fn breakpoints(p: &DivParams) -> Vec<u64> {
    let scale = 2f64.powi(p.zh_frac() as i32);
    (1..spline_keys() as u32)
        .map(|i| (scale * 2f64.powf(K_MIN as f64 + i as f64 / PIECES as f64)).round() as u64)
        .collect()
}

/// Intercept and slope of each piece, as ring integers: `w = I + S * z'` with `z'` at
/// `zh_frac` and `w` at `w_frac` fractional bits.
fn pieces(p: &DivParams) -> Vec<(i64, i64)> {
    let wf = 2f64.powi(p.w_frac() as i32);
    let sf = 2f64.powi(p.w_frac() as i32 - p.zh_frac() as i32);
    (0..spline_keys() as u32)
        .map(|i| {
            let a = 2f64.powf(K_MIN as f64 + i as f64 / PIECES as f64);
            let b = a * 2f64.powf(1.0 / PIECES as f64);
            let c1 = 2.0 / (a * b + (a + b) * (a + b) / 4.0);
            let c0 = c1 * (a + b);
            ((c0 * wf).round() as i64, -(c1 * sf).round() as i64)
        })
        .collect()
}

/// Plaintext spline value at `z'` (used by the dealer and by tests).
pub fn spline_plain(p: &DivParams, zp: u64) -> i64 {
    let bps = breakpoints(p);
    let (i, s) = pieces(p)[bps.partition_point(|b| *b <= zp)];
    i + s * zp as i64
}

/// Plaintext model of [`div_raw_batch`] on signed inputs at `in_frac` bits. The secure
/// version may differ by the carry out of the masked low bits of `z`.
pub fn div_plain(cfg: &RingConfig, p: &DivParams, y: u64, z: u64) -> u64 {
    let floor = |v: u64, s: u32| cfg.from_signed(cfg.to_signed(v) >> s);
    let s = p.in_frac - p.y_frac();
    let (y_t, z_t) = (floor(y, s), floor(z, s));
    let zp = (z & mask_bits(p.k_bits())) >> p.u_shift();
    let w0 = spline_plain(p, zp) as u64;
    let shift = p.y_frac() + p.w_frac() - p.f3();
    let n0 = floor(cfg.reduce(y_t.wrapping_mul(w0)), shift);
    let d0 = floor(cfg.reduce(z_t.wrapping_mul(w0)), shift);
    cfg.reduce(n0.wrapping_mul((1u64 << (p.f3() + 1)).wrapping_sub(d0)))
}

/// Coefficients of the spline as a function of the public `u`, for secret `r_u`.
fn coef_at(p: &DivParams, bps: &[u64], pcs: &[(i64, i64)], r_u: u64, u: u64) -> [u64; 2] {
    let d = p.d_bits();
    let zp = u.wrapping_sub(r_u) & mask_bits(d);
    let (i, s) = pcs[bps.partition_point(|b| *b <= zp)];
    let (i, s) = (i as u64, s as u64);
    let mut a = i.wrapping_sub(s.wrapping_mul(r_u));
    if u < r_u {
        a = a.wrapping_add(s.wrapping_mul(1u64 << d));
    }
    [a, s]
}

#[derive(Debug, PartialEq, Eq)]
pub struct PairTriple {
    pub a1: u64,
    pub a2: u64,
    pub b: u64,
    pub c1: u64,
    pub c2: u64,
}

#[derive(Debug, PartialEq, Eq)]
pub struct DivKey {
    pub party: PartyId,
    pub params: DivParams,
    /// share of the mask on `z`
    pub z_mask: u64,
    pub trunc_y: Option<TruncKey>,
    pub trunc_z: Option<TruncKey>,
    pub spline_base: [u64; 2],
    pub spline: Vec<DcfKey>,
    pub mul1: PairTriple,
    pub trunc_n: TruncKey,
    pub trunc_d: TruncKey,
    pub mul2: BeaverTriple,
}

impl DivKey {
    pub fn gen<R: RngCore>(cfg: &RingConfig, params: DivParams, rng: &mut R) -> Result<[DivKey; 2]> {
        let m = cfg.mask();
        let r_z = rng.next_u64() & m;
        let in_shift = params.in_frac - params.y_frac();
        let (trunc_y, trunc_z) = if params.needs_input_trunc() {
            let [y0, y1] = TruncKey::gen(cfg, in_shift, rng)?;
            let [z0, z1] = TruncKey::gen_with_mask(cfg, in_shift, r_z, rng)?;
            ([Some(y0), Some(y1)], [Some(z0), Some(z1)])
        } else {
            ([None, None], [None, None])
        };

        let bps = breakpoints(&params);
        let pcs = pieces(&params);
        let d = params.d_bits();
        let r_u = (r_z & mask_bits(params.k_bits())) >> params.u_shift();
        let mut us: Vec<u64> = bps.iter().map(|b| b.wrapping_add(r_u) & mask_bits(d)).collect();
        us.push(r_u);
        us.sort_unstable();
        let dp = DcfParams::new(d, cfg.ell(), 2)?;
        let mut sp = [Vec::with_capacity(us.len()), Vec::with_capacity(us.len())];
        for &u in &us {
            let beta = if u == 0 {
                [0, 0]
            } else {
                let hi = coef_at(&params, &bps, &pcs, r_u, u);
                let lo = coef_at(&params, &bps, &pcs, r_u, u - 1);
                [hi[0].wrapping_sub(lo[0]) & m, hi[1].wrapping_sub(lo[1]) & m]
            };
            let (k0, k1) = dcf_gen(dp, u, &beta, rng)?;
            sp[0].push(k0);
            sp[1].push(k1);
        }
        let base = coef_at(&params, &bps, &pcs, r_u, mask_bits(d));
        let base_s = [split(base[0] & m, m, rng), split(base[1] & m, m, rng)];

        let (a1, a2, b) = (rng.next_u64() & m, rng.next_u64() & m, rng.next_u64() & m);
        let sh = |v: u64, rng: &mut R| split(v & m, m, rng);
        let s_a1 = sh(a1, rng);
        let s_a2 = sh(a2, rng);
        let s_b = sh(b, rng);
        let s_c1 = sh(a1.wrapping_mul(b), rng);
        let s_c2 = sh(a2.wrapping_mul(b), rng);
        let shift3 = params.y_frac() + params.w_frac() - params.f3();
        let [tn0, tn1] = TruncKey::gen(cfg, shift3, rng)?;
        let [td0, td1] = TruncKey::gen(cfg, shift3, rng)?;
        let [m20, m21] = BeaverTriple::gen(cfg, rng);
        let zm = split(r_z, m, rng);

        let [ty0, ty1] = trunc_y;
        let [tz0, tz1] = trunc_z;
        let [sp0, sp1] = sp;
        let mk = |i: usize, ty, tz, spline, tn, td, mul2| DivKey {
            party: if i == 0 { PartyId::P0 } else { PartyId::P1 },
            params,
            z_mask: zm[i],
            trunc_y: ty,
            trunc_z: tz,
            spline_base: [base_s[0][i], base_s[1][i]],
            spline,
            mul1: PairTriple { a1: s_a1[i], a2: s_a2[i], b: s_b[i], c1: s_c1[i], c2: s_c2[i] },
            trunc_n: tn,
            trunc_d: td,
            mul2,
        };
        Ok([mk(0, ty0, tz0, sp0, tn0, td0, m20), mk(1, ty1, tz1, sp1, tn1, td1, m21)])
    }

    /// Share of `[A, S]` such that `w0 = A + S * u`.
    fn spline_coef(&self, cfg: &RingConfig, u: u64) -> [u64; 2] {
        let mut acc = self.spline_base;
        let mut buf = [0u64; 2];
        for k in &self.spline {
            k.eval_into(u, &mut buf);
            acc[0] = acc[0].wrapping_sub(buf[0]);
            acc[1] = acc[1].wrapping_sub(buf[1]);
        }
        [cfg.reduce(acc[0]), cfg.reduce(acc[1])]
    }

    /// Values this party reveals in the first round.
    fn first_round(&self, cfg: &RingConfig, y: u64, z: u64, out: &mut Vec<u64>) {
        if let Some(t) = &self.trunc_y {
            out.push(t.mask_input(cfg, y));
        }
        out.push(cfg.reduce(z.wrapping_add(self.z_mask)));
    }

    /// After the first round: shares of `(y_t, z_t, w0)`.
    fn after_first(&self, cfg: &RingConfig, y: u64, z: u64, opened: &[u64]) -> [u64; 3] {
        let p = &self.params;
        let (y_t, z_hat) = match &self.trunc_y {
            Some(t) => (t.eval(cfg, opened[0], false), opened[1]),
            None => (y, opened[0]),
        };
        let z_t = match &self.trunc_z {
            Some(t) => t.eval(cfg, z_hat, false),
            None => z,
        };
        let u = (z_hat & mask_bits(p.k_bits())) >> p.u_shift();
        let [a, s] = self.spline_coef(cfg, u);
        [y_t, z_t, cfg.reduce(a.wrapping_add(s.wrapping_mul(u)))]
    }

    pub fn write(&self, w: &mut Writer) {
        w.u8(self.party.index() as u8);
        w.u8(self.params.in_frac as u8);
        w.u64(self.z_mask);
        w.u8(self.trunc_y.is_some() as u8);
        if let (Some(ty), Some(tz)) = (&self.trunc_y, &self.trunc_z) {
            ty.write(w);
            tz.write(w);
        }
        w.u64(self.spline_base[0]);
        w.u64(self.spline_base[1]);
        w.u32(self.spline.len() as u32);
        for k in &self.spline {
            k.write(w);
        }
        let t = &self.mul1;
        for v in [t.a1, t.a2, t.b, t.c1, t.c2] {
            w.u64(v);
        }
        self.trunc_n.write(w);
        self.trunc_d.write(w);
        self.mul2.write(w);
    }

    pub fn read(cfg: &RingConfig, r: &mut Reader) -> Result<DivKey> {
        let party = PartyId::from_index(r.u8()? as usize)
            .map_err(|e| Error::DealerFile(e.to_string()))?;
        let params = DivParams::new(cfg, r.u8()? as u32)
            .map_err(|e| Error::DealerFile(format!("division parameters: {e}")))?;
        let z_mask = r.u64()?;
        let (trunc_y, trunc_z) = match r.u8()? {
            0 => (None, None),
            1 => (Some(TruncKey::read(r)?), Some(TruncKey::read(r)?)),
            b => return Err(Error::DealerFile(format!("division flag byte {b}"))),
        };
        if trunc_y.is_some() != params.needs_input_trunc() {
            return Err(Error::DealerFile("division input truncation keys inconsistent".into()));
        }
        let spline_base = [r.u64()?, r.u64()?];
        let n = r.u32()? as usize;
        if n != spline_keys() {
            return Err(Error::DealerFile(format!("expected {} spline keys, found {n}", spline_keys())));
        }
        let spline = (0..n).map(|_| DcfKey::read(r)).collect::<Result<Vec<_>>>()?;
        let mul1 = PairTriple { a1: r.u64()?, a2: r.u64()?, b: r.u64()?, c1: r.u64()?, c2: r.u64()? };
        let trunc_n = TruncKey::read(r)?;
        let trunc_d = TruncKey::read(r)?;
        let mul2 = BeaverTriple::read(party, r)?;
        Ok(DivKey { party, params, z_mask, trunc_y, trunc_z, spline_base, spline, mul1, trunc_n, trunc_d, mul2 })
    }
}

/// Shares of `y_i / z_i` at [`DivParams::out_frac`] fractional bits, in four rounds.
pub fn div_raw_batch(
    ch: &mut Channel,
    cfg: &RingConfig,
    ys: &[u64],
    zs: &[u64],
    keys: Vec<DivKey>,
) -> Result<Vec<u64>> {
    let n = keys.len();
    if ys.len() != n || zs.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: ys.len().min(zs.len()) });
    }
    let Some(first) = keys.first() else { return Ok(Vec::new()) };
    let party = first.party;
    let p = first.params;
    if keys.iter().any(|k| k.params != p || k.party != party) {
        return Err(Error::Config("division keys with mixed parameters in one batch".into()));
    }
    let per = if p.needs_input_trunc() { 2 } else { 1 };

    let mut msg = Vec::with_capacity(per * n);
    for i in 0..n {
        keys[i].first_round(cfg, ys[i], zs[i], &mut msg);
    }
    let opened = open_ring(ch, cfg, MsgKind::Reveal, msg)?;
    let stage: Vec<[u64; 3]> = (0..n)
        .into_par_iter()
        .map(|i| keys[i].after_first(cfg, ys[i], zs[i], &opened[per * i..per * (i + 1)]))
        .collect();

    let mut msg = Vec::with_capacity(3 * n);
    for (k, [y_t, z_t, w0]) in keys.iter().zip(&stage) {
        let t = &k.mul1;
        msg.push(cfg.reduce(y_t.wrapping_sub(t.a1)));
        msg.push(cfg.reduce(z_t.wrapping_sub(t.a2)));
        msg.push(cfg.reduce(w0.wrapping_sub(t.b)));
    }
    let opened = open_ring(ch, cfg, MsgKind::Beaver, msg)?;
    let mut prods = Vec::with_capacity(2 * n);
    for (i, k) in keys.iter().enumerate() {
        let t = &k.mul1;
        let (e1, e2, f) = (opened[3 * i], opened[3 * i + 1], opened[3 * i + 2]);
        let mut n0 = t.c1.wrapping_add(e1.wrapping_mul(t.b)).wrapping_add(f.wrapping_mul(t.a1));
        let mut d0 = t.c2.wrapping_add(e2.wrapping_mul(t.b)).wrapping_add(f.wrapping_mul(t.a2));
        if party == PartyId::P0 {
            n0 = n0.wrapping_add(e1.wrapping_mul(f));
            d0 = d0.wrapping_add(e2.wrapping_mul(f));
        }
        prods.push(cfg.reduce(n0));
        prods.push(cfg.reduce(d0));
    }

    let mut tkeys = Vec::with_capacity(2 * n);
    let mut triples = Vec::with_capacity(n);
    for k in keys {
        tkeys.push(k.trunc_n);
        tkeys.push(k.trunc_d);
        triples.push(k.mul2);
    }
    let t = super::trunc_batch(ch, cfg, &prods, tkeys, false)?;

    let two = 1u64 << (p.f3() + 1);
    let xs: Vec<u64> = (0..n).map(|i| t[2 * i]).collect();
    let es: Vec<u64> = (0..n)
        .map(|i| {
            let c = if party == PartyId::P0 { two } else { 0 };
            cfg.reduce(c.wrapping_sub(t[2 * i + 1]))
        })
        .collect();
    beaver_mul_batch(ch, cfg, &xs, &es, triples)
}

/// Standalone division with the quotient rounded to the ring's `frac` bits. Five rounds.
pub fn div_gate(
    ch: &mut Channel,
    cfg: &RingConfig,
    y: ArithShare,
    z: ArithShare,
    key: DivKey,
    out: TruncKey,
) -> Result<ArithShare> {
    if key.params.out_frac() - cfg.frac() != out.shift {
        return Err(Error::Config("output truncation key has the wrong shift".into()));
    }
    let c = div_raw_batch(ch, cfg, &[y.val.0], &[z.val.0], vec![key])?;
    let r = super::trunc_batch(ch, cfg, &c, vec![out], true)?;
    Ok(ArithShare::new(y.party, y.wire, cfg.elem(r[0])))
}
