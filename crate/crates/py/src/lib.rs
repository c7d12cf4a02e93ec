//! Session-level Python interface. Shares and keys never cross into Python.

use std::path::PathBuf;

use emcomp_core::attack::attack_demo as native_attack;
use emcomp_core::bench::{run_bench, BenchConfig};
use emcomp_core::protocol::{run_seeded, Embedding, EmbeddingDb, LocalRun, Mode, ProtocolConfig, Variant};
use emcomp_core::transport::NetProfile;
use emcomp_core::{Error, PartyId, RingConfig};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(emcomp, EmcompError, PyException, "Base class; `code` matches the CLI exit status.");
create_exception!(emcomp, ConfigError, EmcompError, "Bad configuration or input (exit status 2).");
create_exception!(emcomp, ProtocolError, EmcompError, "Protocol aborted (exit status 3).");

fn to_py(e: Error) -> PyErr {
    let (err, code) = if e.is_config() {
        (ConfigError::new_err(e.to_string()), 2)
    } else {
        (ProtocolError::new_err(e.to_string()), 3)
    };
    Python::attach(|py| {
        let _ = err.value(py).setattr("code", code);
    });
    err
}

#[derive(IntoPyObject)]
enum QueryResult {
    Indices(Vec<usize>),
    Any(bool),
}

fn protocol_config(threshold: f64, mode: &str, protocol: &str, ell: u32, frac: u32) -> Result<ProtocolConfig, Error> {
    ProtocolConfig::new(threshold, Mode::parse(mode)?, Variant::parse(protocol)?, RingConfig::new(ell, frac)?)
}

fn outcome(run: &LocalRun) -> QueryResult {
    match run.client.indices() {
        Some(ix) => QueryResult::Indices(ix),
        None => QueryResult::Any(run.client.any.unwrap_or(false)),
    }
}

struct Inner {
    db: EmbeddingDb,
    config: ProtocolConfig,
    last: Option<LocalRun>,
}

/// A loaded database and protocol configuration. Not shareable across threads.
#[pyclass(unsendable, module = "emcomp")]
struct Session {
    inner: Option<Inner>,
}

impl Session {
    fn open(&mut self) -> PyResult<&mut Inner> {
        self.inner.as_mut().ok_or_else(|| ConfigError::new_err("session is closed"))
    }
}

#[pymethods]
impl Session {
    #[new]
    #[pyo3(signature = (db_path, threshold=0.35, mode="indices", protocol="fss", ell=64, frac=16))]
    fn new(db_path: PathBuf, threshold: f64, mode: &str, protocol: &str, ell: u32, frac: u32) -> PyResult<Self> {
        let config = protocol_config(threshold, mode, protocol, ell, frac).map_err(to_py)?;
        let db = EmbeddingDb::load(&db_path).map_err(to_py)?;
        Ok(Session { inner: Some(Inner { db, config, last: None }) })
    }

    /// Match one query. Indices mode returns a list of indices, bit mode a bool.
    #[pyo3(signature = (query, seed=0))]
    fn query(&mut self, py: Python<'_>, query: Vec<f64>, seed: u64) -> PyResult<QueryResult> {
        let inner = self.open()?;
        let q = Embedding::new("query", query).map_err(to_py)?;
        let (db, pc) = (&inner.db, &inner.config);
        let run = py.detach(|| run_seeded(pc, &q, db, None, seed)).map_err(to_py)?;
        let out = outcome(&run);
        inner.last = Some(run);
        Ok(out)
    }

    /// Communication of the last query: rounds and payload bytes per party.
    fn last_stats<'py>(&mut self, py: Python<'py>) -> PyResult<Option<Bound<'py, PyDict>>> {
        let Some(run) = &self.open()?.last else { return Ok(None) };
        let d = PyDict::new(py);
        d.set_item("rounds", run.transcript.rounds())?;
        d.set_item(
            "payload_bytes",
            (run.transcript.payload_bytes(PartyId::P0), run.transcript.payload_bytes(PartyId::P1)),
        )?;
        Ok(Some(d))
    }

    #[getter]
    fn mode(&mut self) -> PyResult<&'static str> {
        Ok(self.open()?.config.mode.name())
    }

    /// Echo of the configuration.
    #[getter]
    fn config<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let inner = self.open()?;
        let c = &inner.config;
        let d = PyDict::new(py);
        d.set_item("threshold", c.threshold)?;
        d.set_item("mode", c.mode.name())?;
        d.set_item("protocol", c.variant.name())?;
        d.set_item("ell", c.ring.ell())?;
        d.set_item("frac", c.ring.frac())?;
        d.set_item("m", inner.db.len())?;
        d.set_item("n", inner.db.dim())?;
        Ok(d)
    }

    #[getter]
    fn closed(&self) -> bool {
        self.inner.is_none()
    }

    fn close(&mut self) {
        self.inner = None;
    }

    fn __enter__(slf: Py<Self>) -> Py<Self> {
        slf
    }

    fn __exit__(&mut self, _t: Py<PyAny>, _v: Py<PyAny>, _tb: Py<PyAny>) -> bool {
        self.close();
        false
    }
}

/// One query with a throwaway session. Same result as `emcomp run` with the same seed.
#[pyfunction]
#[pyo3(signature = (db_path, query, threshold=0.35, mode="indices", protocol="fss", ell=64, frac=16, seed=0))]
#[allow(clippy::too_many_arguments)]
fn run_query(
    py: Python<'_>,
    db_path: PathBuf,
    query: Vec<f64>,
    threshold: f64,
    mode: &str,
    protocol: &str,
    ell: u32,
    frac: u32,
    seed: u64,
) -> PyResult<QueryResult> {
    let mut s = Session::new(db_path, threshold, mode, protocol, ell, frac)?;
    s.query(py, query, seed)
}

/// Benchmark grid as a list of dicts keyed like the CLI CSV columns.
#[pyfunction]
#[pyo3(name = "bench", signature = (profile=None, m=1000, n=128, runs=10, threshold=0.35, seed=1, threads=None))]
#[allow(clippy::too_many_arguments)]
fn bench_grid<'py>(
    py: Python<'py>,
    profile: Option<Vec<String>>,
    m: usize,
    n: usize,
    runs: usize,
    threshold: f64,
    seed: u64,
    threads: Option<usize>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let profiles = match profile {
        None => vec![NetProfile::lan(), NetProfile::wan()],
        Some(p) => p.iter().map(|s| NetProfile::resolve(s)).collect::<Result<_, _>>().map_err(to_py)?,
    };
    let cfg = BenchConfig { m, n, runs, threshold, seed, threads, profiles, ..Default::default() };
    let rows = py.detach(|| run_bench(&cfg)).map_err(to_py)?;
    rows.iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("profile", &r.profile)?;
            d.set_item("protocol", &r.protocol)?;
            d.set_item("output", &r.output)?;
            d.set_item("sim_ms", r.sim_ms)?;
            d.set_item("compute_ms", r.compute_ms)?;
            d.set_item("total_ms", r.total_ms)?;
            d.set_item("rounds", r.rounds)?;
            d.set_item("payload_bytes", r.payload_bytes)?;
            d.set_item("frame_bytes", r.frame_bytes)?;
            Ok(d)
        })
        .collect()
}

/// Recover a random database from a scheme that opens dot products. Returns the report.
#[pyfunction]
#[pyo3(signature = (n=16, m=8, seed=0, ell=64, frac=16))]
fn attack_demo<'py>(py: Python<'py>, n: usize, m: usize, seed: u64, ell: u32, frac: u32) -> PyResult<Bound<'py, PyDict>> {
    use rand_chacha::rand_core::SeedableRng;
    let cfg = RingConfig::new(ell, frac).map_err(to_py)?;
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    let (_, _, rep) = native_attack(&cfg, n, m, &mut rng).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("n", rep.n)?;
    d.set_item("m", rep.m)?;
    d.set_item("condition", rep.condition)?;
    d.set_item("max_error_real", rep.max_error_real)?;
    d.set_item("max_error_ring", rep.max_error_ring)?;
    d.set_item("ring_bound", rep.ring_bound)?;
    Ok(d)
}

#[pymodule]
fn emcomp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("EmcompError", py.get_type::<EmcompError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("ProtocolError", py.get_type::<ProtocolError>())?;
    m.add_class::<Session>()?;
    m.add_function(wrap_pyfunction!(run_query, m)?)?;
    m.add_function(wrap_pyfunction!(bench_grid, m)?)?;
    m.add_function(wrap_pyfunction!(attack_demo, m)?)?;
    Ok(())
}
