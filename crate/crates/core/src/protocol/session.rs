//! One query of the comparison protocol, as seen by one party.
//!
//! The client is party 0 and the server is party 1. Inputs are shared without
//! communication from a PRF both parties can evaluate; all messages after that are
//! openings of masked values.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Mode, ProtocolConfig, Variant};
use super::embedding::{Embedding, EmbeddingDb};
use crate::baseline::ss_drelu_batch;
use crate::dealer::{PartyMaterial, ReplayGuard};
use crate::error::{Error, Result};
use crate::gates::{div_raw_batch, drelu_batch, open_ring, DivParams};
use crate::mpc::b2a_batch;
use crate::prf::{Key128, PrfStream};
use crate::share::PartyId;
use crate::transport::{Channel, Message, MsgKind, Phase, Transcript};

pub enum PartyInput<'a> {
    Client(&'a Embedding),
    Server(&'a EmbeddingDb),
}

impl PartyInput<'_> {
    fn party(&self) -> PartyId {
        match self {
            PartyInput::Client(_) => PartyId::P0,
            PartyInput::Server(_) => PartyId::P1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// keep raw message values in the transcript
    pub capture_values: bool,
    /// handshake nonce; random when absent
    pub nonce: Option<Key128>,
}

/// What a party learns. The server learns nothing.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PartyOutput {
    pub matches: Option<Vec<bool>>,
    pub any: Option<bool>,
    /// wall-clock milliseconds per phase
    pub phase_ms: BTreeMap<Phase, f64>,
}

impl PartyOutput {
    /// Indices of matching entries (indices mode).
    pub fn indices(&self) -> Option<Vec<usize>> {
        self.matches.as_ref().map(|m| m.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i).collect())
    }
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct Hello {
    ell: u32,
    frac: u32,
    n: usize,
    m: usize,
    mode: Mode,
    variant: Variant,
    threshold_bits: u64,
    query_id: u64,
    nonce: Key128,
}

fn check<T: std::fmt::Debug + PartialEq>(field: &str, mine: T, theirs: T) -> Result<()> {
    if mine != theirs {
        return Err(Error::Handshake(format!("{field}: local {mine:?}, peer {theirs:?}")));
    }
    Ok(())
}

fn handshake(ch: &mut Channel, pc: &ProtocolConfig, mat: &PartyMaterial, nonce: Key128) -> Result<Key128> {
    let h = &mat.header;
    let mine = Hello {
        ell: h.ell,
        frac: h.frac,
        n: h.n,
        m: h.m,
        mode: h.mode,
        variant: h.variant,
        threshold_bits: pc.threshold.to_bits(),
        query_id: h.query_id,
        nonce,
    };
    let bytes = ch.handshake(&serde_json::to_vec(&mine)?)?;
    let theirs: Hello = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Handshake(format!("unreadable hello: {e}")))?;
    check("ell", mine.ell, theirs.ell)?;
    check("frac", mine.frac, theirs.frac)?;
    check("n", mine.n, theirs.n)?;
    check("m", mine.m, theirs.m)?;
    check("mode", mine.mode, theirs.mode)?;
    check("protocol", mine.variant, theirs.variant)?;
    check("threshold", pc.threshold, f64::from_bits(theirs.threshold_bits))?;
    check("query id", mine.query_id, theirs.query_id)?;
    let mut key = mat.prf_key;
    for (k, (a, b)) in key.iter_mut().zip(mine.nonce.iter().zip(&theirs.nonce)) {
        *k ^= a ^ b;
    }
    Ok(key)
}

fn validate(pc: &ProtocolConfig, input: &PartyInput, mat: &PartyMaterial, party: PartyId) -> Result<()> {
    pc.validate()?;
    let h = &mat.header;
    if input.party() != party || h.party != party {
        return Err(Error::Config(format!(
            "role mismatch: channel is {party:?}, input is {:?}, dealer material is {:?}",
            input.party(),
            h.party
        )));
    }
    if (h.ell, h.frac) != (pc.ring.ell(), pc.ring.frac()) || h.mode != pc.mode || h.variant != pc.variant {
        return Err(Error::Config("dealer material was generated for a different configuration".into()));
    }
    match input {
        PartyInput::Client(e) => {
            e.validate()?;
            if e.dim() != h.n {
                return Err(Error::DimensionMismatch(format!("query has dimension {}, dealer expects {}", e.dim(), h.n)));
            }
        }
        PartyInput::Server(db) => {
            db.validate()?;
            if db.dim() != h.n || db.len() != h.m {
                return Err(Error::DimensionMismatch(format!(
                    "database is {}x{}, dealer expects {}x{}",
                    db.len(),
                    db.dim(),
                    h.m,
                    h.n
                )));
            }
        }
    }
    Ok(())
}

fn encode_vec(pc: &ProtocolConfig, e: &Embedding) -> Result<Vec<u64>> {
    let f = pc.ring.frac();
    let mut out = e.values.iter().map(|v| pc.ring.encode_scaled(*v, f)).collect::<Result<Vec<_>>>()?;
    out.push(pc.ring.encode_scaled(e.norm(), f)?);
    Ok(out)
}

/// Shares of the client vector and of every database vector, each extended by its norm.
fn share_inputs(
    pc: &ProtocolConfig,
    input: &PartyInput,
    key: Key128,
    n: usize,
    m: usize,
) -> Result<(Vec<u64>, Vec<Vec<u64>>)> {
    let cfg = &pc.ring;
    let mut stream = PrfStream::new(key);
    let mut draw = |k: usize| -> Result<Vec<u64>> {
        (0..k).map(|_| Ok(cfg.reduce(stream.derive(stream.next_seed())?))).collect()
    };
    let own = |mine: &[u64], pads: Vec<u64>| -> Vec<u64> {
        mine.iter().zip(pads).map(|(v, r)| cfg.reduce(v.wrapping_sub(r))).collect()
    };
    let pads = draw(n + 1)?;
    let x = match input {
        PartyInput::Client(e) => own(&encode_vec(pc, e)?, pads),
        PartyInput::Server(_) => pads,
    };
    let mut ps = Vec::with_capacity(m);
    for i in 0..m {
        let pads = draw(n + 1)?;
        ps.push(match input {
            PartyInput::Server(db) => own(&encode_vec(pc, &db.embeddings[i])?, pads),
            PartyInput::Client(_) => pads,
        });
    }
    Ok((x, ps))
}

/// Shares of `y_i = <x, p_i>` and `z_i = |x| |p_i|` at `2f` fractional bits, one round.
fn inner_products(
    ch: &mut Channel,
    pc: &ProtocolConfig,
    mat: &mut PartyMaterial,
    x: &[u64],
    ps: &[Vec<u64>],
) -> Result<(Vec<u64>, Vec<u64>)> {
    let cfg = &pc.ring;
    let n1 = x.len();
    let m = ps.len();
    let first = mat.party() == PartyId::P0;
    let pairs = mat.take_ip(m)?;
    let a = &mat.ip_a;
    let mut msg = Vec::with_capacity(n1 * (m + 1));
    msg.extend(x.iter().zip(a).map(|(v, r)| cfg.reduce(v.wrapping_sub(*r))));
    for (p, t) in ps.iter().zip(&pairs) {
        msg.extend(p.iter().zip(&t.b).map(|(v, r)| cfg.reduce(v.wrapping_sub(*r))));
    }
    let opened = open_ring(ch, cfg, MsgKind::Beaver, msg)?;
    let d = &opened[..n1];
    let out: Vec<(u64, u64)> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let e = &opened[n1 * (i + 1)..n1 * (i + 2)];
            let term = |j: usize| {
                let mut s = d[j].wrapping_mul(t.b[j]).wrapping_add(a[j].wrapping_mul(e[j]));
                if first {
                    s = s.wrapping_add(d[j].wrapping_mul(e[j]));
                }
                s
            };
            let y = (0..n1 - 1).fold(t.c_dot, |s, j| s.wrapping_add(term(j)));
            let z = t.c_norm.wrapping_add(term(n1 - 1));
            (cfg.reduce(y), cfg.reduce(z))
        })
        .collect();
    Ok(out.into_iter().unzip())
}

/// Shares of `v_i = 1{cos_i >= th}`, boolean or arithmetic depending on the mode.
fn basic(
    ch: &mut Channel,
    pc: &ProtocolConfig,
    mat: &mut PartyMaterial,
    x: &[u64],
    ps: &[Vec<u64>],
) -> Result<Vec<u64>> {
    let cfg = &pc.ring;
    let party = mat.party();
    let m = ps.len();
    let (ys, zs) = inner_products(ch, pc, mat, x, ps)?;
    let th = pc.threshold_encoded() as u64;
    match pc.variant {
        Variant::Fss => {
            let params = DivParams::new(cfg, 2 * cfg.frac())?;
            let c = div_raw_batch(ch, cfg, &ys, &zs, mat.take_div(m)?)?;
            let th_c = th << (params.out_frac() - cfg.frac());
            let diff: Vec<u64> = c
                .iter()
                .map(|v| cfg.reduce(if party == PartyId::P0 { v.wrapping_sub(th_c) } else { *v }))
                .collect();
            drelu_batch(ch, cfg, &diff, mat.take_cmp(m)?)
        }
        Variant::FssDirect | Variant::Ss => {
            let f = cfg.frac();
            let diff: Vec<u64> = ys
                .iter()
                .zip(&zs)
                .map(|(y, z)| cfg.reduce((y << f).wrapping_sub(th.wrapping_mul(*z))))
                .collect();
            if pc.variant == Variant::Ss {
                let v = ss_drelu_batch(ch, cfg, party, &diff, mat.take_cmp_eda(m)?)?;
                Ok(v.into_iter().map(u64::from).collect())
            } else {
                drelu_batch(ch, cfg, &diff, mat.take_cmp(m)?)
            }
        }
    }
}

/// Server reveals its boolean shares to the client in one message.
fn reveal_to_client(ch: &mut Channel, party: PartyId, v: &[bool]) -> Result<Option<Vec<bool>>> {
    if party == PartyId::P1 {
        ch.send(MsgKind::Output, &Message::bits(v.to_vec()))?;
        return Ok(None);
    }
    let theirs = ch.recv(MsgKind::Output)?;
    if theirs.len() != v.len() {
        return Err(Error::LengthMismatch { expected: v.len(), got: theirs.len() });
    }
    Ok(Some(v.iter().zip(&theirs.values).map(|(a, b)| a ^ (*b == 1)).collect()))
}

/// Shares of `1{sum v_i >= 1}` as a boolean.
fn any_match(ch: &mut Channel, pc: &ProtocolConfig, mat: &mut PartyMaterial, v: &[u64]) -> Result<bool> {
    let cfg = &pc.ring;
    let party = mat.party();
    let arith = match pc.variant {
        Variant::Ss => {
            let bits: Vec<bool> = v.iter().map(|b| *b == 1).collect();
            b2a_batch(ch, cfg, party, &bits, &mat.take_dabits(v.len())?)?
        }
        _ => v.to_vec(),
    };
    let sum = arith.iter().fold(0u64, |s, a| s.wrapping_add(*a));
    let diff = cfg.reduce(if party == PartyId::P0 { sum.wrapping_sub(1) } else { sum });
    match pc.variant {
        Variant::Ss => Ok(ss_drelu_batch(ch, cfg, party, &[diff], vec![mat.take_bit_eda()?])?[0]),
        _ => Ok(drelu_batch(ch, cfg, &[diff], vec![mat.take_bit_cmp()?])?[0] == 1),
    }
}

/// Run one query as either party. Consumes the dealer material.
pub fn run_party(
    ch: &mut Channel,
    pc: &ProtocolConfig,
    input: PartyInput,
    mut mat: PartyMaterial,
    opts: &RunOptions,
) -> Result<PartyOutput> {
    let party = ch.party();
    validate(pc, &input, &mat, party)?;
    ch.capture_values(opts.capture_values);
    let nonce = opts.nonce.unwrap_or_else(|| {
        let mut k = [0u8; 16];
        rand::thread_rng().fill_bytes(&mut k);
        k
    });
    let mut out = PartyOutput::default();
    let mut clock = Instant::now();
    let mut lap = |out: &mut PartyOutput, phase: Phase| {
        let now = Instant::now();
        *out.phase_ms.entry(phase).or_default() += (now - clock).as_secs_f64() * 1e3;
        clock = now;
    };

    ch.set_phase(Phase::Setup);
    let key = handshake(ch, pc, &mat, nonce)?;
    lap(&mut out, Phase::Setup);

    ch.set_phase(Phase::Input);
    let (n, m) = (mat.header.n, mat.header.m);
    let (x, ps) = share_inputs(pc, &input, key, n, m)?;
    lap(&mut out, Phase::Input);

    ch.set_phase(Phase::Basic);
    let v = basic(ch, pc, &mut mat, &x, &ps)?;
    lap(&mut out, Phase::Basic);

    match pc.mode {
        Mode::Indices => {
            ch.set_phase(Phase::Indices);
            let bits: Vec<bool> = v.iter().map(|b| *b == 1).collect();
            out.matches = reveal_to_client(ch, party, &bits)?;
            lap(&mut out, Phase::Indices);
        }
        Mode::Bit => {
            ch.set_phase(Phase::Bit);
            let b = any_match(ch, pc, &mut mat, &v)?;
            out.any = reveal_to_client(ch, party, &[b])?.map(|r| r[0]);
            lap(&mut out, Phase::Bit);
        }
    }
    if mat.remaining() != 0 {
        return Err(Error::Desync(format!("{} dealer items left unused", mat.remaining())));
    }
    Ok(out)
}

/// Long-lived server state: the database and the query ids already served.
pub struct Server {
    pub db: EmbeddingDb,
    pub config: ProtocolConfig,
    guard: ReplayGuard,
}

impl Server {
    pub fn new(db: EmbeddingDb, config: ProtocolConfig) -> Result<Self> {
        db.validate()?;
        config.validate()?;
        Ok(Self { db, config, guard: ReplayGuard::new() })
    }

    pub fn serve(&mut self, ch: &mut Channel, mat: PartyMaterial, opts: &RunOptions) -> Result<Transcript> {
        self.guard.admit(mat.header.query_id)?;
        run_party(ch, &self.config, PartyInput::Server(&self.db), mat, opts)?;
        Ok(ch.take_transcript())
    }
}

/// Both parties of one query in this process, over an in-memory channel.
#[derive(Clone, Debug)]
pub struct LocalRun {
    pub client: PartyOutput,
    pub server: PartyOutput,
    pub transcript: Transcript,
}

impl LocalRun {
    /// Per-phase wall time, the slower party.
    pub fn phase_ms(&self, phase: Phase) -> f64 {
        let c = self.client.phase_ms.get(&phase).copied().unwrap_or(0.0);
        let s = self.server.phase_ms.get(&phase).copied().unwrap_or(0.0);
        c.max(s)
    }
}

pub fn run_local_with(
    pc: &ProtocolConfig,
    query: &Embedding,
    db: &EmbeddingDb,
    materials: [PartyMaterial; 2],
    opts: &RunOptions,
) -> Result<LocalRun> {
    run_pair(pc, query, db, materials, [*opts, *opts])
}

fn run_pair(
    pc: &ProtocolConfig,
    query: &Embedding,
    db: &EmbeddingDb,
    materials: [PartyMaterial; 2],
    opts: [RunOptions; 2],
) -> Result<LocalRun> {
    let [m0, m1] = materials;
    let [o0, o1] = opts;
    let (mut c0, mut c1) = crate::transport::channel_pair();
    std::thread::scope(|s| {
        let h = s.spawn(move || {
            let r = run_party(&mut c1, pc, PartyInput::Server(db), m1, &o1);
            (r, c1.take_transcript())
        });
        let r0 = run_party(&mut c0, pc, PartyInput::Client(query), m0, &o0);
        // a failed client drops its channel so the server unblocks
        let t0 = c0.take_transcript();
        drop(c0);
        let (r1, t1) = h.join().map_err(|_| Error::Channel("server thread panicked".into()))?;
        let client = r0?;
        let server = r1?;
        Ok(LocalRun { client, server, transcript: Transcript::merge(&t0, &t1) })
    })
}

/// Handshake nonce of `party` for a reproducible run.
pub fn seeded_nonce(seed: u64, party: PartyId) -> Key128 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x6e6f6e6365);
    rng.set_stream(party.index() as u64 + 1);
    let mut k = [0u8; 16];
    rng.fill_bytes(&mut k);
    k
}

/// Fully determined by `seed`: dealer material (unless given) and both nonces.
/// Same inputs give the same outputs and the same transcript.
pub fn run_seeded(
    pc: &ProtocolConfig,
    query: &Embedding,
    db: &EmbeddingDb,
    materials: Option<[PartyMaterial; 2]>,
    seed: u64,
) -> Result<LocalRun> {
    let mats = match materials {
        Some(m) => m,
        None => crate::dealer::provision(pc, query.dim(), db.len(), seed, seed)?,
    };
    let opts = [PartyId::P0, PartyId::P1].map(|p| RunOptions { capture_values: false, nonce: Some(seeded_nonce(seed, p)) });
    run_pair(pc, query, db, mats, opts)
}

/// Provision fresh dealer material from `seed` and run one query locally.
pub fn run_local(
    pc: &ProtocolConfig,
    query: &Embedding,
    db: &EmbeddingDb,
    seed: u64,
    opts: &RunOptions,
) -> Result<LocalRun> {
    let mats = crate::dealer::provision(pc, query.dim(), db.len(), seed, seed)?;
    run_local_with(pc, query, db, mats, opts)
}
