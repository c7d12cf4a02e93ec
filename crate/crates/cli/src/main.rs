use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use emcomp_core::attack::attack_demo;
use emcomp_core::bench::{run_bench, write_csv, BenchConfig};
use emcomp_core::dealer::{provision, PartyMaterial};
use emcomp_core::protocol::*;
use emcomp_core::transport::{Channel, NetProfile, Phase, TcpLink, Transcript};
use emcomp_core::{Error, PartyId, RingConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::json;

#[derive(Parser)]
#[command(name = "emcomp", version, about = "Two-party secure face embedding comparison")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write correlated randomness for one query (party0.emc, party1.emc)
    Dealer(DealerArgs),
    /// Execute a query as client, server, or both in one process
    Run(RunArgs),
    /// Benchmark grid over {lan, wan} x {ss, fss} x {basic, indices, bit}
    Bench(BenchArgs),
    /// Recover database embeddings from a scheme that reveals dot products
    Attack(AttackArgs),
}

#[derive(Args, Clone)]
struct ProtoArgs {
    /// JSON session config: {threshold, mode, ell, frac, net_profile, seed}
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    ell: Option<u32>,
    #[arg(long)]
    frac: Option<u32>,
    /// fss | fss-direct | ss
    #[arg(long, default_value = "fss")]
    protocol: String,
    #[arg(long)]
    seed: Option<u64>,
    /// lan | wan | path to a JSON profile
    #[arg(long)]
    net: Option<String>,
}

struct Resolved {
    pc: ProtocolConfig,
    seed: u64,
    net: NetProfile,
}

impl ProtoArgs {
    fn resolve(&self) -> anyhow::Result<Resolved> {
        let base = match &self.config {
            Some(p) => Some(SessionConfig::load(p)?),
            None => None,
        };
        let mode = match (&self.mode, &base) {
            (Some(m), _) => Mode::parse(m)?,
            (None, Some(b)) => b.mode,
            (None, None) => Mode::Indices,
        };
        let threshold = self.threshold.or(base.as_ref().map(|b| b.threshold)).unwrap_or(0.35);
        let ell = self.ell.or(base.as_ref().map(|b| b.ell)).unwrap_or(64);
        let frac = self.frac.or(base.as_ref().map(|b| b.frac)).unwrap_or(16);
        let seed = self.seed.or(base.as_ref().map(|b| b.seed)).unwrap_or(0);
        let net = self.net.clone().or(base.as_ref().map(|b| b.net_profile.clone())).unwrap_or_else(|| "lan".into());
        let pc = ProtocolConfig::new(threshold, mode, Variant::parse(&self.protocol)?, RingConfig::new(ell, frac)?)?;
        Ok(Resolved { pc, seed, net: NetProfile::resolve(&net)? })
    }
}

#[derive(Args)]
struct DealerArgs {
    #[command(flatten)]
    proto: ProtoArgs,
    /// embedding dimension (or taken from --db)
    #[arg(long)]
    n: Option<usize>,
    /// database size (or taken from --db)
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    db: Option<PathBuf>,
    /// defaults to the seed
    #[arg(long)]
    query_id: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    proto: ProtoArgs,
    /// client | server | both
    #[arg(long, default_value = "both")]
    role: String,
    #[arg(long)]
    db: Option<PathBuf>,
    /// file holding exactly one embedding
    #[arg(long)]
    query: Option<PathBuf>,
    /// dealer file for this party, or for --role both a directory with party0.emc and party1.emc
    #[arg(long)]
    dealer: Option<PathBuf>,
    /// server: address to listen on
    #[arg(long)]
    listen: Option<String>,
    /// client: server address
    #[arg(long)]
    connect: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
    /// directory for outcome.json and transcript.{json,csv}
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 1000)]
    m: usize,
    #[arg(long, default_value_t = 128)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 0.35)]
    threshold: f64,
    #[arg(long, default_value_t = 64)]
    ell: u32,
    #[arg(long, default_value_t = 16)]
    frac: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    /// profiles to charge (repeatable); lan and wan by default
    #[arg(long)]
    net: Vec<String>,
    /// CSV output path; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    m: usize,
    #[arg(long, default_value_t = 64)]
    ell: u32,
    #[arg(long, default_value_t = 16)]
    frac: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// directory for truth.csv and recovered.csv
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_query(path: &Path) -> anyhow::Result<Embedding> {
    let db = EmbeddingDb::load(path)?;
    if db.len() != 1 {
        return Err(Error::Embedding(format!("{} holds {} embeddings, expected 1", path.display(), db.len())).into());
    }
    Ok(db.embeddings.into_iter().next().unwrap())
}

fn need<'a, T>(v: &'a Option<T>, flag: &str) -> anyhow::Result<&'a T> {
    v.as_ref().ok_or_else(|| Error::Config(format!("{flag} is required")).into())
}

fn cmd_dealer(a: DealerArgs) -> anyhow::Result<()> {
    let r = a.proto.resolve()?;
    let (n, m) = match &a.db {
        Some(p) => {
            let db = EmbeddingDb::load(p)?;
            (a.n.unwrap_or(db.dim()), a.m.unwrap_or(db.len()))
        }
        None => (*need(&a.n, "--n")?, *need(&a.m, "--m")?),
    };
    let mats = provision(&r.pc, n, m, r.seed, a.query_id.unwrap_or(r.seed))?;
    std::fs::create_dir_all(&a.out)?;
    for (i, mat) in mats.iter().enumerate() {
        let path = a.out.join(format!("party{i}.emc"));
        mat.save(&path)?;
        eprintln!("wrote {} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());
    }
    Ok(())
}

fn report(pc: &ProtocolConfig, role: &str, out: &PartyOutput, t: &Transcript, net: &NetProfile) -> serde_json::Value {
    let phases: serde_json::Map<String, serde_json::Value> = [Phase::Basic, Phase::Indices, Phase::Bit]
        .iter()
        .filter(|p| !t.phase(**p).records.is_empty())
        .map(|p| (p.name().to_string(), json!(t.phase(*p).simulated_ms(net))))
        .collect();
    json!({
        "role": role,
        "mode": pc.mode.name(),
        "protocol": pc.variant.name(),
        "indices": out.indices(),
        "any": out.any,
        "rounds": t.rounds(),
        "payload_bytes": [t.payload_bytes(PartyId::P0), t.payload_bytes(PartyId::P1)],
        "frame_bytes": [t.frame_bytes(PartyId::P0), t.frame_bytes(PartyId::P1)],
        "net": net.name,
        "simulated_ms": phases,
    })
}

fn emit(dir: &Option<PathBuf>, rep: &serde_json::Value, t: &Transcript) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(rep)?);
    if let Some(d) = dir {
        std::fs::create_dir_all(d)?;
        std::fs::write(d.join("outcome.json"), serde_json::to_vec_pretty(rep)?)?;
        t.write_json(std::fs::File::create(d.join("transcript.json"))?)?;
        t.write_csv(std::fs::File::create(d.join("transcript.csv"))?)?;
    }
    Ok(())
}

fn cmd_run(a: RunArgs) -> anyhow::Result<()> {
    let r = a.proto.resolve()?;
    if let Some(t) = a.threads {
        rayon_threads(t)?;
    }
    match a.role.as_str() {
        "both" => {
            let q = load_query(need(&a.query, "--query")?)?;
            let db = EmbeddingDb::load(need(&a.db, "--db")?)?;
            let mats = match &a.dealer {
                Some(dir) => Some([
                    PartyMaterial::load(&dir.join("party0.emc"))?,
                    PartyMaterial::load(&dir.join("party1.emc"))?,
                ]),
                None => None,
            };
            let run = run_seeded(&r.pc, &q, &db, mats, r.seed)?;
            emit(&a.out, &report(&r.pc, "both", &run.client, &run.transcript, &r.net), &run.transcript)
        }
        "server" => {
            let db = EmbeddingDb::load(need(&a.db, "--db")?)?;
            let mat = PartyMaterial::load(need(&a.dealer, "--dealer")?)?;
            let addr = need(&a.listen, "--listen")?;
            let listener = TcpListener::bind(addr).with_context(|| format!("cannot listen on {addr}"))?;
            eprintln!("listening on {}", listener.local_addr()?);
            let mut ch = Channel::new(PartyId::P1, TcpLink::accept(&listener)?);
            let opts = RunOptions { capture_values: false, nonce: Some(seeded_nonce(r.seed, PartyId::P1)) };
            let mut server = Server::new(db, r.pc)?;
            let t = server.serve(&mut ch, mat, &opts)?;
            emit(&a.out, &report(&r.pc, "server", &PartyOutput::default(), &t, &r.net), &t)
        }
        "client" => {
            let q = load_query(need(&a.query, "--query")?)?;
            let mat = PartyMaterial::load(need(&a.dealer, "--dealer")?)?;
            let addr = need(&a.connect, "--connect")?;
            let mut ch = Channel::new(PartyId::P0, TcpLink::connect(addr.as_str())?);
            let opts = RunOptions { capture_values: false, nonce: Some(seeded_nonce(r.seed, PartyId::P0)) };
            let out = run_party(&mut ch, &r.pc, PartyInput::Client(&q), mat, &opts)?;
            let t = ch.take_transcript();
            emit(&a.out, &report(&r.pc, "client", &out, &t, &r.net), &t)
        }
        other => Err(Error::Config(format!("unknown role {other:?} (client|server|both)")).into()),
    }
}

fn rayon_threads(t: usize) -> anyhow::Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(t)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")).into())
}

fn cmd_bench(a: BenchArgs) -> anyhow::Result<()> {
    let profiles = if a.net.is_empty() {
        vec![NetProfile::lan(), NetProfile::wan()]
    } else {
        a.net.iter().map(|s| NetProfile::resolve(s)).collect::<emcomp_core::Result<_>>()?
    };
    let cfg = BenchConfig {
        m: a.m,
        n: a.n,
        runs: a.runs,
        threshold: a.threshold,
        seed: a.seed,
        ell: a.ell,
        frac: a.frac,
        threads: a.threads,
        profiles,
    };
    let rows = run_bench(&cfg)?;
    match &a.out {
        Some(p) => {
            write_csv(&rows, std::fs::File::create(p)?)?;
            eprintln!("wrote {}", p.display());
        }
        None => write_csv(&rows, std::io::stdout())?,
    }
    Ok(())
}

fn cmd_attack(a: AttackArgs) -> anyhow::Result<()> {
    let cfg = RingConfig::new(a.ell, a.frac)?;
    let mut rng = ChaCha20Rng::seed_from_u64(a.seed);
    let (truth, recovered, rep) = attack_demo(&cfg, a.n, a.m, &mut rng)?;
    if let Some(d) = &a.out {
        std::fs::create_dir_all(d)?;
        truth.to_csv(std::fs::File::create(d.join("truth.csv"))?)?;
        recovered.to_csv(std::fs::File::create(d.join("recovered.csv"))?)?;
    }
    println!("{}", serde_json::to_string_pretty(&rep)?);
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(err) if !err.is_config() => 3,
        Some(_) => 2,
        None if e.downcast_ref::<std::io::Error>().is_some() => 3,
        None => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Dealer(a) => cmd_dealer(a),
        Cmd::Run(a) => cmd_run(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Attack(a) => cmd_attack(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
