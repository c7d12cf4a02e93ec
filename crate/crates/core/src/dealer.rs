//! Trusted dealer: per-query correlated randomness for both parties.
//!
//! File layout (little endian): `"EMC1" | ell:u8 | frac:u8 | party:u8 | mode:u8 |
//! variant:u8 | n:u32 | m:u32 | query_id:u64 | counts | prf_key | sections`, where
//! `counts` is the number of inner-product triples, daBits, gate keys, edaBits and
//! AND triples, each as u32.

use std::collections::{HashSet, VecDeque};
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::baseline::EdaBits;
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::gates::{split, DivKey, DivParams, DreluKey, OutGroup};
use crate::mpc::DaBit;
use crate::prf::Key128;
use crate::protocol::config::{Mode, ProtocolConfig, Variant};
use crate::ring::RingConfig;
use crate::share::PartyId;

const MAGIC: &[u8; 4] = b"EMC1";

/// What a run needs; both parties' headers must agree on all of it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Header {
    pub ell: u32,
    pub frac: u32,
    pub party: PartyId,
    pub mode: Mode,
    pub variant: Variant,
    pub n: usize,
    pub m: usize,
    pub query_id: u64,
}

impl Header {
    pub fn ring(&self) -> Result<RingConfig> {
        RingConfig::new(self.ell, self.frac)
    }
}

/// Per-pair part of the inner-product correlation. The client-side mask `a` is shared
/// by all pairs; each pair has its own `b` and the two partial products.
#[derive(Debug, PartialEq, Eq)]
pub struct IpPair {
    pub b: Vec<u64>,
    /// share of `sum_{j<n} a_j * b_j`
    pub c_dot: u64,
    /// share of `a_n * b_n`
    pub c_norm: u64,
}

#[derive(Debug, PartialEq, Eq)]
pub struct PartyMaterial {
    pub header: Header,
    pub prf_key: Key128,
    /// share of the client mask, length `n + 1`
    pub ip_a: Vec<u64>,
    ip: VecDeque<IpPair>,
    div: VecDeque<DivKey>,
    cmp: VecDeque<DreluKey>,
    bit_cmp: VecDeque<DreluKey>,
    cmp_eda: VecDeque<EdaBits>,
    bit_eda: VecDeque<EdaBits>,
    dabits: VecDeque<DaBit>,
}

fn take<T>(q: &mut VecDeque<T>, k: usize, what: &str) -> Result<Vec<T>> {
    if q.len() < k {
        return Err(Error::Exhausted(format!("need {k} {what}, {} left", q.len())));
    }
    Ok(q.drain(..k).collect())
}

struct PairMaterial {
    ip: [IpPair; 2],
    div: Option<[DivKey; 2]>,
    cmp: Option<[DreluKey; 2]>,
    eda: Option<[EdaBits; 2]>,
    dabit: Option<[DaBit; 2]>,
}

fn pair_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generate both parties' material for one query. Deterministic in `seed`.
pub fn provision(
    pc: &ProtocolConfig,
    n: usize,
    m: usize,
    seed: u64,
    query_id: u64,
) -> Result<[PartyMaterial; 2]> {
    pc.validate()?;
    if m == 0 {
        return Err(Error::Config("database must hold at least one embedding".into()));
    }
    if n < 2 {
        return Err(Error::Config("embedding dimension must be at least 2".into()));
    }
    let cfg = pc.ring;
    let mask = cfg.mask();
    let group = match pc.mode {
        Mode::Indices => OutGroup::Bool,
        Mode::Bit => OutGroup::Arith,
    };
    let div_params = match pc.variant {
        Variant::Fss => Some(DivParams::new(&cfg, 2 * cfg.frac())?),
        _ => None,
    };

    let mut rng = pair_rng(seed, 0);
    let mut prf_key = [0u8; 16];
    rng.fill_bytes(&mut prf_key);
    let a: Vec<u64> = (0..=n).map(|_| rng.next_u64() & mask).collect();
    let a_sh: Vec<[u64; 2]> = a.iter().map(|v| split(*v, mask, &mut rng)).collect();

    let pairs: Vec<PairMaterial> = (0..m)
        .into_par_iter()
        .map(|i| -> Result<PairMaterial> {
            let mut rng = pair_rng(seed, i as u64 + 1);
            let b: Vec<u64> = (0..=n).map(|_| rng.next_u64() & mask).collect();
            let dot = (0..n).fold(0u64, |s, j| s.wrapping_add(a[j].wrapping_mul(b[j])));
            let c_dot = split(dot, mask, &mut rng);
            let c_norm = split(a[n].wrapping_mul(b[n]), mask, &mut rng);
            let b_sh: Vec<[u64; 2]> = b.iter().map(|v| split(*v, mask, &mut rng)).collect();
            let ip = [0, 1].map(|p| IpPair {
                b: b_sh.iter().map(|s| s[p]).collect(),
                c_dot: c_dot[p],
                c_norm: c_norm[p],
            });
            let div = div_params.map(|dp| DivKey::gen(&cfg, dp, &mut rng)).transpose()?;
            let (cmp, eda, dabit) = match pc.variant {
                Variant::Ss => (
                    None,
                    Some(EdaBits::gen(&cfg, &mut rng)),
                    (pc.mode == Mode::Bit).then(|| DaBit::gen(&cfg, &mut rng)),
                ),
                _ => (Some(DreluKey::gen(&cfg, group, &mut rng)?), None, None),
            };
            Ok(PairMaterial { ip, div, cmp, eda, dabit })
        })
        .collect::<Result<_>>()?;

    let mut rng = pair_rng(seed, u64::MAX);
    let (bit_cmp, bit_eda) = match (pc.mode, pc.variant) {
        (Mode::Indices, _) => (None, None),
        (Mode::Bit, Variant::Ss) => (None, Some(EdaBits::gen(&cfg, &mut rng))),
        (Mode::Bit, _) => (Some(DreluKey::gen(&cfg, OutGroup::Bool, &mut rng)?), None),
    };

    let mut out = [0, 1].map(|p| PartyMaterial {
        header: Header {
            ell: cfg.ell(),
            frac: cfg.frac(),
            party: PartyId::from_index(p).unwrap(),
            mode: pc.mode,
            variant: pc.variant,
            n,
            m,
            query_id,
        },
        prf_key,
        ip_a: a_sh.iter().map(|s| s[p]).collect(),
        ip: VecDeque::with_capacity(m),
        div: VecDeque::new(),
        cmp: VecDeque::new(),
        bit_cmp: VecDeque::new(),
        cmp_eda: VecDeque::new(),
        bit_eda: VecDeque::new(),
        dabits: VecDeque::new(),
    });
    for pm in pairs {
        let [i0, i1] = pm.ip;
        out[0].ip.push_back(i0);
        out[1].ip.push_back(i1);
        if let Some([k0, k1]) = pm.div {
            out[0].div.push_back(k0);
            out[1].div.push_back(k1);
        }
        if let Some([k0, k1]) = pm.cmp {
            out[0].cmp.push_back(k0);
            out[1].cmp.push_back(k1);
        }
        if let Some([e0, e1]) = pm.eda {
            out[0].cmp_eda.push_back(e0);
            out[1].cmp_eda.push_back(e1);
        }
        if let Some([d0, d1]) = pm.dabit {
            out[0].dabits.push_back(d0);
            out[1].dabits.push_back(d1);
        }
    }
    if let Some([k0, k1]) = bit_cmp {
        out[0].bit_cmp.push_back(k0);
        out[1].bit_cmp.push_back(k1);
    }
    if let Some([e0, e1]) = bit_eda {
        out[0].bit_eda.push_back(e0);
        out[1].bit_eda.push_back(e1);
    }
    Ok(out)
}

impl PartyMaterial {
    pub fn party(&self) -> PartyId {
        self.header.party
    }

    pub fn take_ip(&mut self, k: usize) -> Result<Vec<IpPair>> {
        take(&mut self.ip, k, "inner-product triples")
    }

    pub fn take_div(&mut self, k: usize) -> Result<Vec<DivKey>> {
        take(&mut self.div, k, "division keys")
    }

    pub fn take_cmp(&mut self, k: usize) -> Result<Vec<DreluKey>> {
        take(&mut self.cmp, k, "comparison keys")
    }

    pub fn take_bit_cmp(&mut self) -> Result<DreluKey> {
        Ok(take(&mut self.bit_cmp, 1, "output comparison keys")?.remove(0))
    }

    pub fn take_cmp_eda(&mut self, k: usize) -> Result<Vec<EdaBits>> {
        take(&mut self.cmp_eda, k, "edaBits")
    }

    pub fn take_bit_eda(&mut self) -> Result<EdaBits> {
        Ok(take(&mut self.bit_eda, 1, "output edaBits")?.remove(0))
    }

    pub fn take_dabits(&mut self, k: usize) -> Result<Vec<DaBit>> {
        take(&mut self.dabits, k, "daBits")
    }

    /// Items not yet consumed. Zero after a complete run.
    pub fn remaining(&self) -> usize {
        self.ip.len()
            + self.div.len()
            + self.cmp.len()
            + self.bit_cmp.len()
            + self.cmp_eda.len()
            + self.bit_eda.len()
            + self.dabits.len()
    }

    fn counts(&self) -> [u32; 5] {
        let ands: usize =
            self.cmp_eda.iter().chain(&self.bit_eda).map(|e| e.ands.len()).sum();
        [
            self.ip.len() as u32,
            self.dabits.len() as u32,
            (self.div.len() + self.cmp.len() + self.bit_cmp.len()) as u32,
            (self.cmp_eda.len() + self.bit_eda.len()) as u32,
            ands as u32,
        ]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut w = Writer::new();
        w.bytes(MAGIC);
        w.u8(h.ell as u8);
        w.u8(h.frac as u8);
        w.u8(h.party.index() as u8);
        w.u8(h.mode.to_u8());
        w.u8(h.variant.to_u8());
        w.u32(h.n as u32);
        w.u32(h.m as u32);
        w.u64(h.query_id);
        for c in self.counts() {
            w.u32(c);
        }
        w.bytes(&self.prf_key);
        w.u64s(&self.ip_a);
        w.u32(self.ip.len() as u32);
        for p in &self.ip {
            w.u64s(&p.b);
            w.u64(p.c_dot);
            w.u64(p.c_norm);
        }
        w.u32(self.div.len() as u32);
        for k in &self.div {
            k.write(&mut w);
        }
        for q in [&self.cmp, &self.bit_cmp] {
            w.u32(q.len() as u32);
            for k in q {
                k.write(&mut w);
            }
        }
        for q in [&self.cmp_eda, &self.bit_eda] {
            w.u32(q.len() as u32);
            for e in q {
                e.write(&mut w);
            }
        }
        w.u32(self.dabits.len() as u32);
        for d in &self.dabits {
            w.u8(d.bit as u8);
            w.u64(d.arith);
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::DealerFile("missing EMC1 magic".into()));
        }
        let ell = r.u8()? as u32;
        let frac = r.u8()? as u32;
        let party = PartyId::from_index(r.u8()? as usize).map_err(|e| Error::DealerFile(e.to_string()))?;
        let mode = Mode::from_u8(r.u8()?)?;
        let variant = Variant::from_u8(r.u8()?)?;
        let n = r.u32()? as usize;
        let m = r.u32()? as usize;
        let query_id = r.u64()?;
        let header = Header { ell, frac, party, mode, variant, n, m, query_id };
        let cfg = header.ring().map_err(|e| Error::DealerFile(e.to_string()))?;
        let mut counts = [0u32; 5];
        for c in counts.iter_mut() {
            *c = r.u32()?;
        }
        let prf_key: Key128 = r.take(16)?.try_into().unwrap();
        let ip_a = r.u64s()?;
        let k = r.u32()? as usize;
        let mut ip = VecDeque::with_capacity(k);
        for _ in 0..k {
            ip.push_back(IpPair { b: r.u64s()?, c_dot: r.u64()?, c_norm: r.u64()? });
        }
        let k = r.u32()? as usize;
        let div = (0..k).map(|_| DivKey::read(&cfg, &mut r)).collect::<Result<VecDeque<_>>>()?;
        let k = r.u32()? as usize;
        let cmp = (0..k).map(|_| DreluKey::read(&mut r)).collect::<Result<VecDeque<_>>>()?;
        let k = r.u32()? as usize;
        let bit_cmp = (0..k).map(|_| DreluKey::read(&mut r)).collect::<Result<VecDeque<_>>>()?;
        let k = r.u32()? as usize;
        let cmp_eda = (0..k).map(|_| EdaBits::read(party, &mut r)).collect::<Result<VecDeque<_>>>()?;
        let k = r.u32()? as usize;
        let bit_eda = (0..k).map(|_| EdaBits::read(party, &mut r)).collect::<Result<VecDeque<_>>>()?;
        let k = r.u32()? as usize;
        let mut dabits = VecDeque::with_capacity(k);
        for _ in 0..k {
            dabits.push_back(DaBit { bit: r.u8()? != 0, arith: r.u64()? });
        }
        if r.remaining() != 0 {
            return Err(Error::DealerFile(format!("{} trailing bytes", r.remaining())));
        }
        let mat = Self { header, prf_key, ip_a, ip, div, cmp, bit_cmp, cmp_eda, bit_eda, dabits };
        if mat.counts() != counts {
            return Err(Error::DealerFile("section sizes disagree with header counts".into()));
        }
        if mat.ip_a.len() != n + 1 || mat.ip.iter().any(|p| p.b.len() != n + 1) {
            return Err(Error::DealerFile("inner-product triples have the wrong dimension".into()));
        }
        Ok(mat)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::DealerFile(format!("cannot read {}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

/// Rejects a second run under a query id that was already served.
#[derive(Debug, Default)]
pub struct ReplayGuard {
    seen: HashSet<u64>,
}

impl ReplayGuard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn admit(&mut self, query_id: u64) -> Result<()> {
        if !self.seen.insert(query_id) {
            return Err(Error::Reuse(format!("dealer material for query {query_id} was already used")));
        }
        Ok(())
    }
}
