//! Benchmark grid: {lan, wan} x {ss, fss} x {basic, indices, bit}.
//!
//! Each run provisions fresh dealer material (not timed), executes both parties over
//! an in-memory channel, and charges the network from the transcript. `sim_ms` is the
//! simulated network time of the phase; `compute_ms` is local wall time of the slower
//! party on this machine.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{
    embedding_with_cosine, random_embedding, run_local, Embedding, EmbeddingDb, Mode, ProtocolConfig, RunOptions,
    Variant,
};
use crate::ring::RingConfig;
use crate::transport::{NetProfile, Phase};
use crate::PartyId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub m: usize,
    pub n: usize,
    pub runs: usize,
    pub threshold: f64,
    pub seed: u64,
    pub ell: u32,
    pub frac: u32,
    /// rayon worker threads for local gate evaluation, all cores when absent
    pub threads: Option<usize>,
    pub profiles: Vec<NetProfile>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            m: 1000,
            n: 128,
            runs: 10,
            threshold: 0.35,
            seed: 1,
            ell: 64,
            frac: 16,
            threads: None,
            profiles: vec![NetProfile::lan(), NetProfile::wan()],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub profile: String,
    pub protocol: String,
    pub output: String,
    pub sim_ms: f64,
    pub compute_ms: f64,
    pub total_ms: f64,
    pub rounds: usize,
    /// payload bytes sent by the busier party
    pub payload_bytes: u64,
    pub frame_bytes: u64,
}

/// Synthetic workload: every tenth entry is a planted near-duplicate of the query.
pub fn workload(n: usize, m: usize, seed: u64) -> (Embedding, EmbeddingDb) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let q = random_embedding("query", n, &mut rng);
    let db = (0..m)
        .map(|i| {
            if i % 10 == 0 {
                embedding_with_cosine(i.to_string(), &q, 0.8, &mut rng)
            } else {
                random_embedding(i.to_string(), n, &mut rng)
            }
        })
        .collect();
    (q, EmbeddingDb { embeddings: db })
}

#[derive(Default)]
struct Acc {
    sim: Vec<f64>,
    compute: f64,
    runs: usize,
    rounds: usize,
    payload: u64,
    frame: u64,
}

pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.runs == 0 || cfg.profiles.is_empty() {
        return Err(Error::Config("benchmark needs at least one run and one profile".into()));
    }
    for p in &cfg.profiles {
        p.validate()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| bench_inner(cfg))
}

fn bench_inner(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    let ring = RingConfig::new(cfg.ell, cfg.frac)?;
    let (q, db) = workload(cfg.n, cfg.m, cfg.seed);
    db.validate()?;
    let variants = [Variant::Ss, Variant::Fss];
    let cells = [(Mode::Indices, Phase::Basic), (Mode::Indices, Phase::Indices), (Mode::Bit, Phase::Bit)];
    // acc[variant][cell][profile]
    let mut acc: Vec<Vec<Acc>> =
        (0..variants.len()).map(|_| (0..cells.len()).map(|_| Acc::default()).collect()).collect();
    for run in 0..cfg.runs {
        for (vi, &variant) in variants.iter().enumerate() {
            for mode in [Mode::Indices, Mode::Bit] {
                let pc = ProtocolConfig::new(cfg.threshold, mode, variant, ring)?;
                let seed = cfg.seed ^ ((run as u64) << 8) ^ ((vi as u64) << 4) ^ mode.to_u8() as u64;
                let out = run_local(&pc, &q, &db, seed, &RunOptions::default())?;
                for (ci, &(cm, phase)) in cells.iter().enumerate() {
                    if cm != mode {
                        continue;
                    }
                    let t = out.transcript.phase(phase);
                    let a = &mut acc[vi][ci];
                    if a.sim.is_empty() {
                        a.sim = vec![0.0; cfg.profiles.len()];
                    }
                    for (pi, p) in cfg.profiles.iter().enumerate() {
                        a.sim[pi] += t.simulated_ms(p);
                    }
                    a.compute += out.phase_ms(phase);
                    a.runs += 1;
                    a.rounds = t.rounds();
                    a.payload = t.payload_bytes(PartyId::P0).max(t.payload_bytes(PartyId::P1));
                    a.frame = t.frame_bytes(PartyId::P0).max(t.frame_bytes(PartyId::P1));
                }
            }
        }
    }
    let mut rows = Vec::new();
    for (pi, p) in cfg.profiles.iter().enumerate() {
        for (vi, variant) in variants.iter().enumerate() {
            for (ci, (_, phase)) in cells.iter().enumerate() {
                let a = &acc[vi][ci];
                let k = a.runs.max(1) as f64;
                let sim = a.sim[pi] / k;
                let compute = a.compute / k;
                rows.push(BenchRow {
                    profile: p.name.clone(),
                    protocol: if *variant == Variant::Ss { "ss".into() } else { "fss".into() },
                    output: phase.name().into(),
                    sim_ms: sim,
                    compute_ms: compute,
                    total_ms: sim + compute,
                    rounds: a.rounds,
                    payload_bytes: a.payload,
                    frame_bytes: a.frame,
                });
            }
        }
    }
    Ok(rows)
}

/// Look up one cell of the grid.
pub fn cell<'a>(rows: &'a [BenchRow], profile: &str, protocol: &str, output: &str) -> Option<&'a BenchRow> {
    rows.iter().find(|r| r.profile == profile && r.protocol == protocol && r.output == output)
}

pub fn write_csv<W: Write>(rows: &[BenchRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grid_shape() {
        let cfg = BenchConfig { m: 6, n: 8, runs: 2, threads: Some(1), ..Default::default() };
        let rows = run_bench(&cfg).unwrap();
        assert_eq!(rows.len(), 12);
        for p in ["lan", "wan"] {
            for proto in ["ss", "fss"] {
                for out in ["basic", "indices", "bit"] {
                    let c = cell(&rows, p, proto, out).unwrap();
                    assert!(c.sim_ms > 0.0 && c.rounds > 0);
                }
            }
        }
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("profile,protocol,output,sim_ms,compute_ms,total_ms,rounds,payload_bytes,frame_bytes"));
        assert_eq!(text.lines().count(), 13);
    }
}
