//! Distributed comparison function over a GGM tree (Boyle et al., EUROCRYPT 2021).
//!
//! A key pair for `(alpha, beta)` satisfies
//! `eval(0, k0, x) + eval(1, k1, x) = beta * 1{x < alpha}` in `Z_{2^out_bits}` for every
//! `x` in `[0, 2^in_bits)`. `beta` may be a short vector (`width` words), which lets one
//! tree walk produce several correlated outputs.
//!
//! PRG: a node seed `s` is used as an AES-128 key. Blocks 0 and 1 give the left and
//! right child seeds (control bit = LSB, seed = block with LSB cleared); blocks
//! `2..2+width` give `2*width` words split into the left and right value shares. The
//! leaf conversion uses blocks from counter `0x8000_0000`.

use rand::RngCore;

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::prf::Prf;
use crate::ring::mask_bits;

const CONVERT_BASE: u128 = 0x8000_0000;
const MAX_WIDTH: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DcfParams {
    pub in_bits: u32,
    pub out_bits: u32,
    pub width: usize,
}

impl DcfParams {
    pub fn new(in_bits: u32, out_bits: u32, width: usize) -> Result<Self> {
        if !(1..=64).contains(&in_bits) || !(1..=64).contains(&out_bits) {
            return Err(Error::Config(format!("dcf bit widths {in_bits}/{out_bits} out of range")));
        }
        if !(1..=MAX_WIDTH).contains(&width) {
            return Err(Error::Config(format!("dcf output width {width} out of range")));
        }
        Ok(Self { in_bits, out_bits, width })
    }

    #[inline]
    fn out_mask(&self) -> u64 {
        mask_bits(self.out_bits)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedCorrection {
    pub seed: u128,
    pub t_left: bool,
    pub t_right: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DcfKey {
    pub party: u8,
    pub params: DcfParams,
    pub root: u128,
    /// one per level, MSB first
    pub seed_cws: Vec<SeedCorrection>,
    /// `width` value corrections per level, flattened
    pub value_cws: Vec<u64>,
    pub final_cw: Vec<u64>,
}

struct Expanded {
    s: [u128; 2],
    t: [bool; 2],
    v: [[u64; MAX_WIDTH]; 2],
}

#[inline]
fn prg(seed: u128, width: usize) -> Expanded {
    let prf = Prf::from_u128(seed);
    let mut blocks = [0u128; 2 + MAX_WIDTH];
    prf.expand_into(0, &mut blocks[..2 + width]);
    let mut words = [0u64; 2 * MAX_WIDTH];
    for (i, b) in blocks[2..2 + width].iter().enumerate() {
        words[2 * i] = *b as u64;
        words[2 * i + 1] = (*b >> 64) as u64;
    }
    let mut v = [[0u64; MAX_WIDTH]; 2];
    v[0][..width].copy_from_slice(&words[..width]);
    v[1][..width].copy_from_slice(&words[width..2 * width]);
    Expanded {
        s: [blocks[0] & !1, blocks[1] & !1],
        t: [blocks[0] & 1 == 1, blocks[1] & 1 == 1],
        v,
    }
}

#[inline]
fn convert(seed: u128, width: usize) -> [u64; MAX_WIDTH] {
    let prf = Prf::from_u128(seed);
    let mut blocks = [0u128; MAX_WIDTH];
    prf.expand_into(CONVERT_BASE, &mut blocks[..width]);
    let mut out = [0u64; MAX_WIDTH];
    for (o, b) in out.iter_mut().zip(blocks.iter()).take(width) {
        *o = *b as u64;
    }
    out
}

/// Generate a key pair for `beta * 1{x < alpha}`.
pub fn dcf_gen<R: RngCore>(
    params: DcfParams,
    alpha: u64,
    beta: &[u64],
    rng: &mut R,
) -> Result<(DcfKey, DcfKey)> {
    let n = params.in_bits;
    let w = params.width;
    if beta.len() != w {
        return Err(Error::LengthMismatch { expected: w, got: beta.len() });
    }
    if alpha > mask_bits(n) {
        return Err(Error::Config(format!("alpha {alpha} does not fit in {n} bits")));
    }
    let om = params.out_mask();
    let roots = [rng_u128(rng), rng_u128(rng)];
    let mut s = roots;
    let mut t = [false, true];
    let mut v_alpha = [0u64; MAX_WIDTH];
    let mut seed_cws = Vec::with_capacity(n as usize);
    let mut value_cws = Vec::with_capacity(n as usize * w);

    for i in (0..n).rev() {
        let a = ((alpha >> i) & 1) as usize;
        let e0 = prg(s[0], w);
        let e1 = prg(s[1], w);
        let keep = a;
        let lose = 1 - a;
        let s_cw = e0.s[lose] ^ e1.s[lose];
        let neg1 = t[1];
        let mut v_cw = [0u64; MAX_WIDTH];
        for j in 0..w {
            let mut d = e1.v[lose][j].wrapping_sub(e0.v[lose][j]).wrapping_sub(v_alpha[j]);
            if lose == 0 {
                d = d.wrapping_add(beta[j]);
            }
            v_cw[j] = signed(d, neg1) & om;
            v_alpha[j] = v_alpha[j]
                .wrapping_sub(e1.v[keep][j])
                .wrapping_add(e0.v[keep][j])
                .wrapping_add(signed(v_cw[j], neg1))
                & om;
        }
        let t_cw = [e0.t[0] ^ e1.t[0] ^ (a == 0), e0.t[1] ^ e1.t[1] ^ (a == 1)];
        seed_cws.push(SeedCorrection { seed: s_cw, t_left: t_cw[0], t_right: t_cw[1] });
        value_cws.extend_from_slice(&v_cw[..w]);
        for (b, e) in [e0, e1].iter().enumerate() {
            let tb = t[b];
            s[b] = e.s[keep] ^ if tb { s_cw } else { 0 };
            t[b] = e.t[keep] ^ (tb & t_cw[keep]);
        }
    }
    let c0 = convert(s[0], w);
    let c1 = convert(s[1], w);
    let final_cw: Vec<u64> = (0..w)
        .map(|j| signed(c1[j].wrapping_sub(c0[j]).wrapping_sub(v_alpha[j]), t[1]) & om)
        .collect();

    let mk = |party: u8| DcfKey {
        party,
        params,
        root: roots[party as usize],
        seed_cws: seed_cws.clone(),
        value_cws: value_cws.clone(),
        final_cw: final_cw.clone(),
    };
    Ok((mk(0), mk(1)))
}

#[inline]
fn signed(v: u64, negate: bool) -> u64 {
    if negate {
        v.wrapping_neg()
    } else {
        v
    }
}

fn rng_u128<R: RngCore>(rng: &mut R) -> u128 {
    let mut b = [0u8; 16];
    rng.fill_bytes(&mut b);
    u128::from_le_bytes(b)
}

impl DcfKey {
    /// This party's share of `beta * 1{x < alpha}`, one word per output lane.
    pub fn eval(&self, x: u64) -> Vec<u64> {
        let mut out = [0u64; MAX_WIDTH];
        self.eval_into(x, &mut out);
        out[..self.params.width].to_vec()
    }

    /// Allocation-free evaluation; writes `width` words into `out`.
    pub fn eval_into(&self, x: u64, out: &mut [u64]) {
        let w = self.params.width;
        let n = self.params.in_bits;
        let om = self.params.out_mask();
        let neg = self.party == 1;
        let mut s = self.root;
        let mut t = self.party == 1;
        let mut acc = [0u64; MAX_WIDTH];
        for (level, i) in (0..n).rev().enumerate() {
            let mut e = prg(s, w);
            let cw = self.seed_cws[level];
            if t {
                e.s[0] ^= cw.seed;
                e.s[1] ^= cw.seed;
                e.t[0] ^= cw.t_left;
                e.t[1] ^= cw.t_right;
            }
            let dir = ((x >> i) & 1) as usize;
            let vcw = &self.value_cws[level * w..(level + 1) * w];
            for j in 0..w {
                let mut term = e.v[dir][j];
                if t {
                    term = term.wrapping_add(vcw[j]);
                }
                acc[j] = acc[j].wrapping_add(signed(term, neg));
            }
            s = e.s[dir];
            t = e.t[dir];
        }
        let c = convert(s, w);
        for j in 0..w {
            let mut term = c[j];
            if t {
                term = term.wrapping_add(self.final_cw[j]);
            }
            out[j] = acc[j].wrapping_add(signed(term, neg)) & om;
        }
    }

    /// Serialized size in bytes.
    pub fn byte_len(&self) -> usize {
        let w = self.params.width;
        4 + 16 + self.params.in_bits as usize * (16 + 1 + 8 * w) + 8 * w
    }

    /// `in_bits | out_bits | width | party | root | levels... | final`, little-endian.
    pub fn write(&self, out: &mut Writer) {
        out.u8(self.params.in_bits as u8);
        out.u8(self.params.out_bits as u8);
        out.u8(self.params.width as u8);
        out.u8(self.party);
        out.u128(self.root);
        let w = self.params.width;
        for (level, cw) in self.seed_cws.iter().enumerate() {
            out.u128(cw.seed);
            out.u8(cw.t_left as u8 | (cw.t_right as u8) << 1);
            for &v in &self.value_cws[level * w..(level + 1) * w] {
                out.u64(v);
            }
        }
        for &v in &self.final_cw {
            out.u64(v);
        }
    }

    pub fn read(r: &mut Reader) -> Result<DcfKey> {
        let in_bits = r.u8()? as u32;
        let out_bits = r.u8()? as u32;
        let width = r.u8()? as usize;
        let params = DcfParams::new(in_bits, out_bits, width)
            .map_err(|e| Error::DealerFile(format!("dcf header: {e}")))?;
        let party = r.u8()?;
        if party > 1 {
            return Err(Error::DealerFile(format!("dcf party byte {party}")));
        }
        let root = r.u128()?;
        let mut seed_cws = Vec::with_capacity(in_bits as usize);
        let mut value_cws = Vec::with_capacity(in_bits as usize * width);
        for _ in 0..in_bits {
            let seed = r.u128()?;
            let tb = r.u8()?;
            if tb > 3 {
                return Err(Error::DealerFile(format!("dcf control byte {tb}")));
            }
            seed_cws.push(SeedCorrection { seed, t_left: tb & 1 == 1, t_right: tb & 2 == 2 });
            for _ in 0..width {
                value_cws.push(r.u64()?);
            }
        }
        let final_cw = (0..width).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        Ok(DcfKey { party, params, root, seed_cws, value_cws, final_cw })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn check_exhaustive(params: DcfParams, alpha: u64, beta: &[u64], rng: &mut ChaCha20Rng) {
        let (k0, k1) = dcf_gen(params, alpha, beta, rng).unwrap();
        let om = mask_bits(params.out_bits);
        for x in 0..(1u64 << params.in_bits) {
            let (a, b) = (k0.eval(x), k1.eval(x));
            for j in 0..params.width {
                let want = if x < alpha { beta[j] & om } else { 0 };
                assert_eq!(a[j].wrapping_add(b[j]) & om, want, "x={x} alpha={alpha} lane {j}");
            }
        }
    }

    #[test]
    fn example_alpha5_beta1_ell8() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        check_exhaustive(DcfParams::new(8, 8, 1).unwrap(), 5, &[1], &mut rng);
    }

    #[test]
    fn zero_function_and_empty_interval() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let p = DcfParams::new(8, 8, 1).unwrap();
        check_exhaustive(p, 77, &[0], &mut rng);
        check_exhaustive(p, 0, &[123], &mut rng);
        check_exhaustive(p, 255, &[9], &mut rng);
    }

    #[test]
    fn random_points_ell8_and_12() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for ell in [8u32, 12] {
            let p = DcfParams::new(ell, ell, 1).unwrap();
            for _ in 0..20 {
                let alpha = rng.gen::<u64>() & mask_bits(ell);
                let beta = rng.gen::<u64>();
                check_exhaustive(p, alpha, &[beta], &mut rng);
            }
        }
    }

    #[test]
    fn boolean_and_vector_outputs() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        check_exhaustive(DcfParams::new(10, 1, 1).unwrap(), 600, &[1], &mut rng);
        check_exhaustive(DcfParams::new(9, 64, 2).unwrap(), 300, &[u64::MAX - 4, 1 << 40], &mut rng);
        check_exhaustive(DcfParams::new(1, 64, 1).unwrap(), 1, &[7], &mut rng);
    }

    #[test]
    fn wide_inputs_spot_check() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let p = DcfParams::new(64, 64, 1).unwrap();
        for _ in 0..20 {
            let alpha: u64 = rng.gen();
            let (k0, k1) = dcf_gen(p, alpha, &[42], &mut rng).unwrap();
            let probes = [0, alpha.wrapping_sub(1), alpha, alpha.wrapping_add(1), u64::MAX, rng.gen()];
            for x in probes {
                let got = k0.eval(x)[0].wrapping_add(k1.eval(x)[0]);
                assert_eq!(got, if x < alpha { 42 } else { 0 });
            }
        }
    }

    #[test]
    fn eval_is_deterministic_and_serialization_roundtrips() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let (k0, _) = dcf_gen(DcfParams::new(12, 64, 2).unwrap(), 99, &[1, 2], &mut rng).unwrap();
        assert_eq!(k0.eval(1234), k0.eval(1234));
        let mut w = Writer::new();
        k0.write(&mut w);
        assert_eq!(w.buf.len(), k0.byte_len());
        let back = DcfKey::read(&mut Reader::new(&w.buf)).unwrap();
        assert_eq!(back, k0);
        assert!(DcfKey::read(&mut Reader::new(&w.buf[..w.buf.len() - 1])).is_err());
    }

    #[test]
    fn single_key_outputs_look_random() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let (k0, _) = dcf_gen(DcfParams::new(12, 64, 1).unwrap(), 2000, &[1], &mut rng).unwrap();
        let ones: u64 = (0..4096u64).map(|x| k0.eval(x)[0].count_ones() as u64).sum();
        let n = 4096.0 * 64.0;
        let z = (ones as f64 - n / 2.0) / (n / 4.0).sqrt();
        assert!(z.abs() < 5.0, "monobit z-score {z}");
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let p = DcfParams::new(8, 8, 1).unwrap();
        assert!(dcf_gen(p, 256, &[1], &mut rng).is_err());
        assert!(dcf_gen(p, 3, &[1, 2], &mut rng).is_err());
        assert!(DcfParams::new(0, 8, 1).is_err());
        assert!(DcfParams::new(8, 8, 0).is_err());
    }
}
