#![allow(dead_code)]

use emcomp_core::baseline::{ss_drelu_batch, EdaBits};
use emcomp_core::gates::{drelu_batch, split, DreluKey, OutGroup};
use emcomp_core::protocol::{embedding_with_cosine, random_embedding, Embedding, EmbeddingDb};
use emcomp_core::transport::{channel_pair, Channel, Transcript};
use emcomp_core::{PartyId, RingConfig};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Run two closures as the two parties over an in-memory channel pair.
pub fn two_party<A: Send, B: Send>(
    f0: impl FnOnce(&mut Channel) -> A + Send,
    f1: impl FnOnce(&mut Channel) -> B + Send,
) -> (A, B, Transcript) {
    let (mut c0, mut c1) = channel_pair();
    std::thread::scope(|s| {
        let h = s.spawn(move || {
            let r = f1(&mut c1);
            (r, c1.transcript())
        });
        let a = f0(&mut c0);
        let (b, t1) = h.join().unwrap();
        (a, b, Transcript::merge(&c0.transcript(), &t1))
    })
}

/// FSS dReLU on every input with fresh keys. Returns reconstructed bits.
pub fn fss_drelu(cfg: RingConfig, xs: &[u64], seed: u64) -> (Vec<bool>, Transcript) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (mut s0, mut s1, mut k0, mut k1) = (vec![], vec![], vec![], vec![]);
    for &x in xs {
        let sh = split(x, cfg.mask(), &mut rng);
        let [a, b] = DreluKey::gen(&cfg, OutGroup::Bool, &mut rng).unwrap();
        s0.push(sh[0]);
        s1.push(sh[1]);
        k0.push(a);
        k1.push(b);
    }
    let (v0, v1, t) = two_party(
        |ch| drelu_batch(ch, &cfg, &s0, k0).unwrap(),
        |ch| drelu_batch(ch, &cfg, &s1, k1).unwrap(),
    );
    (v0.iter().zip(&v1).map(|(a, b)| (a ^ b) == 1).collect(), t)
}

/// Secret-sharing dReLU on every input with fresh edaBits.
pub fn ss_drelu(cfg: RingConfig, xs: &[u64], seed: u64) -> (Vec<bool>, Transcript) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (mut s0, mut s1, mut e0, mut e1) = (vec![], vec![], vec![], vec![]);
    for &x in xs {
        let sh = split(x, cfg.mask(), &mut rng);
        let [a, b] = EdaBits::gen(&cfg, &mut rng);
        s0.push(sh[0]);
        s1.push(sh[1]);
        e0.push(a);
        e1.push(b);
    }
    let (v0, v1, t) = two_party(
        |ch| ss_drelu_batch(ch, &cfg, PartyId::P0, &s0, e0).unwrap(),
        |ch| ss_drelu_batch(ch, &cfg, PartyId::P1, &s1, e1).unwrap(),
    );
    (v0.iter().zip(&v1).map(|(a, b)| a ^ b).collect(), t)
}

pub fn random_words(cfg: &RingConfig, k: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..k).map(|_| cfg.reduce(rng.next_u64())).collect()
}

/// Query and database where roughly a third of the entries have a cosine near `th`.
pub fn instance(n: usize, m: usize, th: f64, seed: u64) -> (Embedding, EmbeddingDb) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let q = random_embedding("q", n, &mut rng);
    let db = (0..m)
        .map(|i| match i % 3 {
            0 => embedding_with_cosine(i.to_string(), &q, th + rng.gen_range(-0.1..0.1), &mut rng),
            1 => embedding_with_cosine(i.to_string(), &q, rng.gen_range(-1.0..1.0), &mut rng),
            _ => random_embedding(i.to_string(), n, &mut rng),
        })
        .collect();
    (q, EmbeddingDb::new(db).unwrap())
}
