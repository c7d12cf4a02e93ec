use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use emcomp_core::protocol::{embedding_with_cosine, random_embedding, EmbeddingDb};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::Value;

fn emcomp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_emcomp"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    emcomp().args(args).current_dir(cwd).output().unwrap()
}

fn ok(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

/// db.csv with planted matches at 2 and 5, q.csv with the query.
fn fixture(dir: &Path) {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let q = random_embedding("q", 12, &mut rng);
    let db: Vec<_> = (0..7)
        .map(|i| {
            let cos = if i == 2 || i == 5 { 0.9 } else { -0.2 };
            embedding_with_cosine(i.to_string(), &q, cos, &mut rng)
        })
        .collect();
    EmbeddingDb::new(db).unwrap().save(&dir.join("db.csv")).unwrap();
    EmbeddingDb::new(vec![q]).unwrap().save(&dir.join("q.csv")).unwrap();
}

fn indices(v: &Value) -> Vec<u64> {
    v["indices"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect()
}

#[test]
fn loopback_finds_planted_matches() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    for proto in ["fss", "fss-direct", "ss"] {
        let v = ok(&run(&["run", "--db", "db.csv", "--query", "q.csv", "--protocol", proto], dir.path()));
        assert_eq!(indices(&v), vec![2, 5], "{proto}");
        let b = ok(&run(
            &["run", "--db", "db.csv", "--query", "q.csv", "--protocol", proto, "--mode", "bit"],
            dir.path(),
        ));
        assert_eq!(b["any"], Value::Bool(true), "{proto}");
    }
}

#[test]
fn same_seed_same_outputs_and_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    for out in ["r1", "r2"] {
        ok(&run(&["run", "--db", "db.csv", "--query", "q.csv", "--seed", "9", "--out", out], dir.path()));
    }
    for f in ["outcome.json", "transcript.json", "transcript.csv"] {
        let a = std::fs::read(dir.path().join("r1").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("r2").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn dealer_files_drive_a_run() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let out = run(&["dealer", "--db", "db.csv", "--seed", "4", "--out", "d"], dir.path());
    assert!(out.status.success());
    let v = ok(&run(&["run", "--db", "db.csv", "--query", "q.csv", "--seed", "4", "--dealer", "d"], dir.path()));
    assert_eq!(indices(&v), vec![2, 5]);
}

#[test]
fn empty_database_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["dealer", "--n", "8", "--m", "0", "--out", "d"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["run", "--protocol", "nope"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

/// Start a server on an ephemeral port and return it with its address.
fn server(args: &[&str], cwd: &Path) -> (std::process::Child, String) {
    let mut child = emcomp()
        .args(args)
        .args(["--role", "server", "--listen", "127.0.0.1:0"])
        .current_dir(cwd)
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.as_mut().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").expect(&line).to_string();
    (child, addr)
}

#[test]
fn tcp_run_matches_loopback() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    assert!(run(&["dealer", "--db", "db.csv", "--out", "d"], dir.path()).status.success());
    let (srv, addr) = server(&["run", "--db", "db.csv", "--dealer", "d/party1.emc"], dir.path());
    let c = ok(&run(
        &["run", "--role", "client", "--query", "q.csv", "--dealer", "d/party0.emc", "--connect", &addr],
        dir.path(),
    ));
    assert_eq!(indices(&c), vec![2, 5]);
    let s = ok(&srv.wait_with_output().unwrap());
    assert_eq!(s["indices"], Value::Null);
}

#[test]
fn mismatched_ring_aborts_both_parties() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let a = ["dealer", "--db", "db.csv", "--protocol", "ss"];
    assert!(run(&[&a[..], &["--out", "d64"]].concat(), dir.path()).status.success());
    assert!(run(&[&a[..], &["--ell", "48", "--frac", "12", "--out", "d48"]].concat(), dir.path()).status.success());
    let (srv, addr) =
        server(&["run", "--protocol", "ss", "--db", "db.csv", "--dealer", "d64/party1.emc"], dir.path());
    let c = run(
        &[
            "run", "--role", "client", "--protocol", "ss", "--ell", "48", "--frac", "12", "--query", "q.csv",
            "--dealer", "d48/party0.emc", "--connect", &addr,
        ],
        dir.path(),
    );
    assert_eq!(c.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&c.stderr).contains("handshake"));
    assert_eq!(srv.wait_with_output().unwrap().status.code(), Some(3));
}

#[test]
fn attack_and_bench_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let v = ok(&run(&["attack", "--n", "6", "--m", "4", "--out", "a"], dir.path()));
    assert!(v["max_error_real"].as_f64().unwrap() < 1e-9);
    let truth = EmbeddingDb::load(&dir.path().join("a/truth.csv")).unwrap();
    let rec = EmbeddingDb::load(&dir.path().join("a/recovered.csv")).unwrap();
    assert_eq!((truth.len(), rec.len(), rec.dim()), (4, 4, 6));

    let out = run(&["bench", "--m", "4", "--n", "6", "--runs", "1", "--threads", "1", "--out", "b.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(text.lines().count(), 13);
}
