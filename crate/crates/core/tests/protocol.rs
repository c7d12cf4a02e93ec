use emcomp_core::dealer::provision;
use emcomp_core::protocol::*;
use emcomp_core::transport::Phase;
use emcomp_core::{Error, RingConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn fixture(n: usize, m: usize, th: f64, seed: u64) -> (Embedding, EmbeddingDb) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let q = random_embedding("q", n, &mut rng);
    let cos = [th + 0.2, th - 0.2, 0.9, -0.5, th + 0.01, th - 0.01];
    let db = (0..m)
        .map(|i| {
            if i % 3 == 0 {
                embedding_with_cosine(i.to_string(), &q, cos[i / 3 % cos.len()], &mut rng)
            } else {
                random_embedding(i.to_string(), n, &mut rng)
            }
        })
        .collect();
    (q, EmbeddingDb::new(db).unwrap())
}

fn pc(mode: Mode, variant: Variant) -> ProtocolConfig {
    ProtocolConfig::new(0.35, mode, variant, RingConfig::default()).unwrap()
}

#[test]
fn all_pipelines_match_plaintext() {
    let (q, db) = fixture(16, 24, 0.35, 1);
    let truth = plaintext_matches(0.35, &q, &db);
    for variant in [Variant::Fss, Variant::FssDirect, Variant::Ss] {
        let c = pc(Mode::Indices, variant);
        let run = run_local(&c, &q, &db, 7, &RunOptions::default()).unwrap();
        assert_eq!(run.client.matches.as_ref().unwrap(), &truth, "{variant:?}");
        assert!(run.server.matches.is_none() && run.server.any.is_none());

        let c = pc(Mode::Bit, variant);
        let run = run_local(&c, &q, &db, 8, &RunOptions::default()).unwrap();
        assert_eq!(run.client.any, Some(truth.iter().any(|b| *b)), "{variant:?}");
    }
}

#[test]
fn bit_mode_without_matches() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let q = random_embedding("q", 8, &mut rng);
    let db = EmbeddingDb::new((0..5).map(|i| embedding_with_cosine(i.to_string(), &q, -0.3, &mut rng)).collect())
        .unwrap();
    for variant in [Variant::Fss, Variant::Ss] {
        let run = run_local(&pc(Mode::Bit, variant), &q, &db, 2, &RunOptions::default()).unwrap();
        assert_eq!(run.client.any, Some(false));
    }
}

#[test]
fn round_counts() {
    let (q, db) = fixture(8, 4, 0.35, 2);
    let cases = [
        (Variant::Fss, 6, 1, 2),
        (Variant::FssDirect, 2, 1, 2),
        (Variant::Ss, 8, 1, 9),
    ];
    for (variant, basic, indices, bit) in cases {
        let t = run_local(&pc(Mode::Indices, variant), &q, &db, 3, &RunOptions::default()).unwrap().transcript;
        assert_eq!(t.phase(Phase::Basic).rounds(), basic, "{variant:?}");
        assert_eq!(t.phase(Phase::Indices).rounds(), indices, "{variant:?}");
        assert_eq!(t.phase(Phase::Input).rounds(), 0);
        let t = run_local(&pc(Mode::Bit, variant), &q, &db, 3, &RunOptions::default()).unwrap().transcript;
        assert_eq!(t.phase(Phase::Bit).rounds(), bit, "{variant:?}");
    }
}

#[test]
fn handshake_rejects_mismatched_material() {
    let (q, db) = fixture(8, 4, 0.35, 3);
    let c = pc(Mode::Indices, Variant::Fss);
    let [m0, _] = provision(&c, 8, 4, 1, 10).unwrap();
    let [_, m1] = provision(&c, 8, 4, 1, 11).unwrap();
    let err = run_local_with(&c, &q, &db, [m0, m1], &RunOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Handshake(_)), "{err}");
}

#[test]
fn wrong_dimension_is_a_config_error() {
    let (q, db) = fixture(8, 4, 0.35, 3);
    let c = pc(Mode::Indices, Variant::FssDirect);
    let mats = provision(&c, 9, 4, 1, 1).unwrap();
    let err = run_local_with(&c, &q, &db, mats, &RunOptions::default()).unwrap_err();
    assert!(err.is_config(), "{err}");
}

#[test]
fn server_refuses_replayed_query() {
    let (q, db) = fixture(8, 3, 0.35, 5);
    let c = pc(Mode::Indices, Variant::FssDirect);
    let mut server = Server::new(db.clone(), c).unwrap();
    for attempt in 0..2 {
        let [m0, m1] = provision(&c, 8, 3, 1, 42).unwrap();
        let (mut c0, mut c1) = emcomp_core::transport::channel_pair();
        let q2 = q.clone();
        let h = std::thread::spawn(move || run_party(&mut c0, &c, PartyInput::Client(&q2), m0, &RunOptions::default()));
        let r = server.serve(&mut c1, m1, &RunOptions::default());
        drop(c1);
        let client = h.join().unwrap();
        if attempt == 0 {
            assert!(r.is_ok() && client.is_ok());
        } else {
            assert!(matches!(r, Err(Error::Reuse(_))));
            assert!(client.is_err());
        }
    }
}
