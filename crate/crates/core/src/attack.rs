//! Embedding recovery against a scheme that reveals dot products to the client.
//!
//! After `n` linearly independent queries `Q` the client holds `Q p_i = d_i` for every
//! database entry and solves for `p_i` directly.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::protocol::{random_embedding, Embedding, EmbeddingDb};
use crate::ring::RingConfig;
use crate::transport::{MsgKind, Phase, Transcript};
use crate::PartyId;

/// Systems with a 1-norm condition number above this are refused.
pub const MAX_CONDITION: f64 = 1e8;

/// One query and the dot products it revealed.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryRecord {
    /// the query as the client knows it (quantized when the scheme runs in the ring)
    pub query: Vec<f64>,
    pub revealed: Vec<f64>,
}

fn check_dims(client: &Embedding, server: &EmbeddingDb) -> Result<()> {
    if client.dim() != server.dim() {
        return Err(Error::DimensionMismatch(format!(
            "query has dimension {}, database {}",
            client.dim(),
            server.dim()
        )));
    }
    Ok(())
}

/// The broken scheme over the reals: every `<x, p_i>` goes to the client.
pub fn simulate_broken_protocol(client: &Embedding, server: &EmbeddingDb) -> Result<Vec<f64>> {
    check_dims(client, server)?;
    Ok(server.embeddings.iter().map(|p| client.dot(p)).collect())
}

/// The broken scheme over `Z_{2^ell}`: inputs at `frac` bits, products opened at `2 frac`.
pub fn simulate_broken_protocol_ring(
    cfg: &RingConfig,
    client: &Embedding,
    server: &EmbeddingDb,
) -> Result<QueryRecord> {
    check_dims(client, server)?;
    let f = cfg.frac();
    let enc = |v: &[f64]| v.iter().map(|x| cfg.encode_scaled(*x, f)).collect::<Result<Vec<_>>>();
    let q = enc(&client.values)?;
    let mut revealed = Vec::with_capacity(server.len());
    for p in &server.embeddings {
        let p = enc(&p.values)?;
        let y = q.iter().zip(&p).fold(0u64, |s, (a, b)| s.wrapping_add(a.wrapping_mul(*b)));
        revealed.push(cfg.decode_scaled(cfg.reduce(y), 2 * f));
    }
    Ok(QueryRecord { query: q.iter().map(|v| cfg.decode_scaled(*v, f)).collect(), revealed })
}

/// LU factorization with partial pivoting of a square matrix.
struct Lu {
    n: usize,
    a: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut a: Vec<f64> = rows.iter().flatten().copied().collect();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs()))
                .unwrap();
            if a[p * n + k] == 0.0 {
                return Err(Error::RankDeficient { cond: f64::INFINITY });
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            for i in k + 1..n {
                let l = a[i * n + k] / a[k * n + k];
                a[i * n + k] = l;
                for j in k + 1..n {
                    a[i * n + j] -= l * a[k * n + j];
                }
            }
        }
        Ok(Self { n, a, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.a[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.a[i * n + j] * x[j];
            }
            x[i] /= self.a[i * n + i];
        }
        x
    }
}

fn norm1(cols: impl Iterator<Item = Vec<f64>>) -> f64 {
    cols.map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `||Q||_1 * ||Q^-1||_1`, with the inverse formed column by column from the LU factors.
pub fn condition_1(rows: &[Vec<f64>]) -> Result<f64> {
    let n = rows.len();
    let lu = Lu::new(rows)?;
    let a = norm1((0..n).map(|j| rows.iter().map(|r| r[j]).collect()));
    let inv = norm1((0..n).map(|j| {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        lu.solve(&e)
    }));
    Ok(a * inv)
}

/// Solve `Q p_i = (d^1_i, ..., d^n_i)` for every database entry.
pub fn recover_embeddings(queries: &[QueryRecord]) -> Result<EmbeddingDb> {
    let Some(first) = queries.first() else {
        return Err(Error::RankDeficient { cond: f64::INFINITY });
    };
    let n = first.query.len();
    let m = first.revealed.len();
    if queries.iter().any(|q| q.query.len() != n || q.revealed.len() != m) {
        return Err(Error::DimensionMismatch("query records disagree on n or m".into()));
    }
    if queries.len() < n {
        return Err(Error::RankDeficient { cond: f64::INFINITY });
    }
    let rows: Vec<Vec<f64>> = queries[..n].iter().map(|q| q.query.clone()).collect();
    let cond = condition_1(&rows)?;
    if !(cond <= MAX_CONDITION) {
        return Err(Error::RankDeficient { cond });
    }
    let lu = Lu::new(&rows)?;
    let embeddings = (0..m)
        .map(|i| {
            let d: Vec<f64> = queries[..n].iter().map(|q| q.revealed[i]).collect();
            Embedding { id: i.to_string(), values: lu.solve(&d) }
        })
        .collect();
    Ok(EmbeddingDb { embeddings })
}

/// Largest coordinate difference between two databases of the same shape.
pub fn max_error(a: &EmbeddingDb, b: &EmbeddingDb) -> f64 {
    a.embeddings
        .iter()
        .zip(&b.embeddings)
        .flat_map(|(x, y)| x.values.iter().zip(&y.values).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct AttackReport {
    pub n: usize,
    pub m: usize,
    pub condition: f64,
    pub max_error_real: f64,
    pub max_error_ring: f64,
    pub ring_bound: f64,
}

/// Plant a random database, query it `n` times through the broken scheme in both
/// precisions and recover it.
pub fn attack_demo<R: Rng>(
    cfg: &RingConfig,
    n: usize,
    m: usize,
    rng: &mut R,
) -> Result<(EmbeddingDb, EmbeddingDb, AttackReport)> {
    let db = EmbeddingDb::new((0..m).map(|i| random_embedding(i.to_string(), n, rng)).collect())?;
    let queries: Vec<Embedding> = (0..n).map(|j| random_embedding(format!("q{j}"), n, rng)).collect();
    let real = queries
        .iter()
        .map(|q| Ok(QueryRecord { query: q.values.clone(), revealed: simulate_broken_protocol(q, &db)? }))
        .collect::<Result<Vec<_>>>()?;
    let ring = queries.iter().map(|q| simulate_broken_protocol_ring(cfg, q, &db)).collect::<Result<Vec<_>>>()?;
    let rec_real = recover_embeddings(&real)?;
    let rec_ring = recover_embeddings(&ring)?;
    let rows: Vec<Vec<f64>> = real.iter().map(|q| q.query.clone()).collect();
    let report = AttackReport {
        n,
        m,
        condition: condition_1(&rows)?,
        max_error_real: max_error(&rec_real, &db),
        max_error_ring: max_error(&rec_ring, &db),
        ring_bound: 2f64.powi(1 - cfg.frac() as i32),
    };
    Ok((db, rec_ring, report))
}

/// What the client of the secure protocol receives as output, against what a linear
/// recovery of one embedding needs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct InformationBudget {
    pub revealed_bits: u64,
    pub bits_per_embedding: u64,
}

/// Count the output bits the server sent to the client.
pub fn information_budget(t: &Transcript, n: usize, ell: u32) -> InformationBudget {
    let revealed_bits = t
        .records
        .iter()
        .filter(|r| r.party == PartyId::P1 && r.kind == MsgKind::Output)
        .filter(|r| matches!(r.phase, Phase::Indices | Phase::Bit))
        .map(|r| r.count as u64)
        .sum();
    InformationBudget { revealed_bits, bits_per_embedding: n as u64 * ell as u64 }
}
