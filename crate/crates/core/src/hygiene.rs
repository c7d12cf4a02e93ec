//! Transcript scan for plaintext intermediates.
//!
//! Every value the protocol computes on secret data (dot products, norm products,
//! quotients, comparison inputs and bits) is turned into a ring word at each scale the
//! code ever uses, and every captured message word is compared against it and its
//! negation within a small window.

use serde::Serialize;

use crate::gates::div::div_plain;
use crate::gates::DivParams;
use crate::protocol::{Embedding, EmbeddingDb, ProtocolConfig};
use crate::ring::RingConfig;
use crate::transport::{MsgKind, Transcript};

#[derive(Clone, Debug, Serialize)]
pub struct Target {
    pub name: String,
    pub pair: usize,
    pub value: u64,
    /// largest ring distance still counted as a hit
    pub window: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Finding {
    pub target: String,
    pub pair: usize,
    pub round: u16,
    pub kind: MsgKind,
    pub word: u64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ScanReport {
    pub scanned_words: usize,
    /// pre-output messages narrower than 8 bits, which cannot be compared meaningfully
    pub narrow_messages: usize,
    /// messages recorded without captured values
    pub uncaptured: usize,
    pub findings: Vec<Finding>,
}

fn at(cfg: &RingConfig, x: f64, frac: u32) -> u64 {
    cfg.encode_scaled(x, frac).unwrap()
}

/// The plaintext values of one query as ring words.
pub fn plaintext_targets(pc: &ProtocolConfig, query: &Embedding, db: &EmbeddingDb) -> Vec<Target> {
    let cfg = &pc.ring;
    let f = cfg.frac();
    let enc = |v: f64| cfg.encode_scaled(v, f).unwrap();
    let q: Vec<u64> = query.values.iter().map(|v| enc(*v)).collect();
    let qn = enc(query.norm());
    let div = DivParams::new(cfg, 2 * f).ok();
    let th = pc.threshold_encoded() as u64;
    let mut out = Vec::new();
    let mut push = |name: &str, pair: usize, value: u64, window: u64| {
        out.push(Target { name: name.into(), pair, value: cfg.reduce(value), window });
    };
    for (i, p) in db.embeddings.iter().enumerate() {
        let pv: Vec<u64> = p.values.iter().map(|v| enc(*v)).collect();
        let y = q.iter().zip(&pv).fold(0u64, |s, (a, b)| s.wrapping_add(a.wrapping_mul(*b)));
        let z = qn.wrapping_mul(enc(p.norm()));
        let cos = query.cosine(p);
        let dot = query.dot(p);
        let nz = query.norm() * p.norm();
        push("y@2f", i, y, 1 << 8);
        push("z@2f", i, z, 1 << 8);
        push("y@f", i, at(cfg, dot, f), 1 << 4);
        push("z@f", i, at(cfg, nz, f), 1 << 4);
        push("y*2^f-th*z", i, (y << f).wrapping_sub(th.wrapping_mul(z)), 1 << 8);
        // quotients carry the division error, about 2^-15 relative
        push("c@f", i, at(cfg, cos, f), 1 << 3);
        push("c@2f", i, at(cfg, cos, 2 * f), 1 << (f + 3));
        if let Some(dp) = &div {
            // the secure quotient sits within 2^34 of the plain model
            let c = div_plain(cfg, dp, y, z);
            let th_c = th << (dp.out_frac() - f);
            push("c@out", i, c, 1 << 36);
            push("c-th@out", i, c.wrapping_sub(th_c), 1 << 36);
        }
        push("v", i, (cos >= pc.threshold) as u64, 1 << 8);
    }
    let hits = db.embeddings.iter().filter(|p| query.cosine(p) >= pc.threshold).count() as u64;
    push("sum v", usize::MAX, hits, 1 << 8);
    out
}

fn ring_dist(cfg: &RingConfig, a: u64, b: u64) -> u64 {
    let d = cfg.reduce(a.wrapping_sub(b));
    d.min(cfg.reduce(b.wrapping_sub(a)))
}

/// Scan all captured messages except the final output reveal.
pub fn scan(cfg: &RingConfig, t: &Transcript, targets: &[Target]) -> ScanReport {
    let mut rep = ScanReport::default();
    for r in t.records.iter().filter(|r| r.kind != MsgKind::Output) {
        let Some(values) = &r.values else {
            rep.uncaptured += 1;
            continue;
        };
        if r.count > 0 && r.payload_bits / (r.count as u64) < 8 {
            rep.narrow_messages += 1;
            continue;
        }
        for &w in values {
            rep.scanned_words += 1;
            for tg in targets {
                let neg = cfg.reduce(tg.value.wrapping_neg());
                if ring_dist(cfg, w, tg.value) <= tg.window || ring_dist(cfg, w, neg) <= tg.window {
                    rep.findings.push(Finding {
                        target: tg.name.clone(),
                        pair: tg.pair,
                        round: r.round,
                        kind: r.kind,
                        word: w,
                    });
                }
            }
        }
    }
    rep
}
