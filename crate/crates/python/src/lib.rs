//! Python bindings: `sepkv.Engine`, `sepkv.Config` and the bench drivers.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Duration;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use sepkv::bench::{self, KeyDist, Pattern, WorkloadSpec, YCSB_THETA};
use sepkv::{CachePolicy, SeparationMode, WalMode, WriteOptions};

create_exception!(sepkv, SepkvError, PyException);

fn to_py(e: sepkv::Error) -> PyErr {
    SepkvError::new_err(e.to_string())
}

fn parse_wal(s: &str) -> PyResult<WalMode> {
    match s {
        "sync" => Ok(WalMode::Sync),
        "async" => Ok(WalMode::Async),
        "off" | "disabled" => Ok(WalMode::Disabled),
        _ => Err(PyValueError::new_err(format!("unknown WAL mode {s:?}"))),
    }
}

fn wal_name(m: WalMode) -> &'static str {
    match m {
        WalMode::Sync => "sync",
        WalMode::Async => "async",
        WalMode::Disabled => "off",
    }
}

fn parse_separation(s: &str) -> PyResult<SeparationMode> {
    match s {
        "separated" => Ok(SeparationMode::Separated),
        "inline" => Ok(SeparationMode::Inline),
        _ => Err(PyValueError::new_err(format!("unknown mode {s:?}"))),
    }
}

/// Engine settings. Sizes are bytes; every memtable-derived size follows
/// `memtable_size` unless set explicitly.
#[pyclass(name = "Config", module = "sepkv", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: sepkv::Config,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (memtable_size = 128 << 20, wal = "sync", mode = "separated", threshold = 4096, lanes = 4))]
    fn new(memtable_size: usize, wal: &str, mode: &str, threshold: usize, lanes: usize) -> PyResult<Self> {
        let mut inner = sepkv::Config::with_memtable_size(memtable_size);
        inner.wal_mode = parse_wal(wal)?;
        inner.separation = parse_separation(mode)?;
        inner.separation_threshold = threshold;
        inner.bvalue_lanes = lanes;
        inner.validate().map_err(to_py)?;
        Ok(PyConfig { inner })
    }

    #[getter]
    fn memtable_size(&self) -> usize {
        self.inner.memtable_size
    }

    #[getter]
    fn wal(&self) -> &'static str {
        wal_name(self.inner.wal_mode)
    }

    #[setter]
    fn set_wal(&mut self, wal: &str) -> PyResult<()> {
        self.inner.wal_mode = parse_wal(wal)?;
        Ok(())
    }

    #[getter]
    fn mode(&self) -> &'static str {
        match self.inner.separation {
            SeparationMode::Separated => "separated",
            SeparationMode::Inline => "inline",
        }
    }

    #[getter]
    fn threshold(&self) -> usize {
        self.inner.separation_threshold
    }

    #[getter]
    fn lanes(&self) -> usize {
        self.inner.bvalue_lanes
    }

    #[getter]
    fn cache_capacity(&self) -> usize {
        self.inner.bvcache_capacity
    }

    #[setter]
    fn set_cache_capacity(&mut self, bytes: usize) {
        self.inner.bvcache_capacity = bytes;
    }

    /// "recency" or "frequency".
    #[setter]
    fn set_cache_policy(&mut self, policy: &str) -> PyResult<()> {
        self.inner.cache_policy = match policy {
            "recency" => CachePolicy::Recency,
            "frequency" => CachePolicy::Frequency,
            _ => return Err(PyValueError::new_err(format!("unknown cache policy {policy:?}"))),
        };
        Ok(())
    }

    #[getter]
    fn async_flush_interval_ms(&self) -> u64 {
        self.inner.async_flush_interval.as_millis() as u64
    }

    #[setter]
    fn set_async_flush_interval_ms(&mut self, ms: u64) {
        self.inner.async_flush_interval = Duration::from_millis(ms);
    }

    #[getter]
    fn level1_size_target(&self) -> u64 {
        self.inner.level1_size_target
    }

    #[setter]
    fn set_level1_size_target(&mut self, bytes: u64) {
        self.inner.level1_size_target = bytes;
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(memtable_size={}, wal={:?}, mode={:?}, threshold={}, lanes={})",
            self.inner.memtable_size,
            self.wal(),
            self.mode(),
            self.inner.separation_threshold,
            self.inner.bvalue_lanes
        )
    }
}

#[pyclass(name = "Engine", module = "sepkv", frozen)]
struct PyEngine {
    inner: sepkv::Engine,
}

fn opts(wal: Option<&str>) -> PyResult<WriteOptions> {
    Ok(WriteOptions {
        wal_mode: wal.map(parse_wal).transpose()?,
    })
}

#[pymethods]
impl PyEngine {
    #[new]
    #[pyo3(signature = (path, config = None))]
    fn open(py: Python<'_>, path: PathBuf, config: Option<PyConfig>) -> PyResult<Self> {
        let config = config.map(|c| c.inner).unwrap_or_default();
        let inner = py.detach(|| sepkv::Engine::open(&path, config)).map_err(to_py)?;
        Ok(PyEngine { inner })
    }

    /// `wal` overrides the configured mode for this write only.
    #[pyo3(signature = (key, value, wal = None))]
    fn put(&self, py: Python<'_>, key: &[u8], value: &[u8], wal: Option<&str>) -> PyResult<()> {
        let o = opts(wal)?;
        py.detach(|| self.inner.put(key, value, o)).map_err(to_py)
    }

    #[pyo3(signature = (key, wal = None))]
    fn delete(&self, py: Python<'_>, key: &[u8], wal: Option<&str>) -> PyResult<()> {
        let o = opts(wal)?;
        py.detach(|| self.inner.delete(key, o)).map_err(to_py)
    }

    fn get<'py>(&self, py: Python<'py>, key: &[u8]) -> PyResult<Option<Bound<'py, PyBytes>>> {
        let v = py.detach(|| self.inner.get(key)).map_err(to_py)?;
        Ok(v.map(|v| PyBytes::new(py, &v)))
    }

    fn flush(&self, py: Python<'_>) -> PyResult<()> {
        py.detach(|| self.inner.flush()).map_err(to_py)
    }

    fn compact(&self, py: Python<'_>) -> PyResult<()> {
        py.detach(|| self.inner.compact()).map_err(to_py)
    }

    fn sync(&self, py: Python<'_>) -> PyResult<()> {
        py.detach(|| self.inner.sync()).map_err(to_py)
    }

    fn close(&self, py: Python<'_>) -> PyResult<()> {
        py.detach(|| self.inner.close()).map_err(to_py)
    }

    /// Every counter by name, plus `write_amplification`.
    fn stats(&self) -> BTreeMap<String, f64> {
        let s = self.inner.stats();
        let mut out: BTreeMap<String, f64> = s.iter().map(|(c, v)| (c.name().to_owned(), v as f64)).collect();
        out.insert("write_amplification".into(), s.write_amplification());
        out
    }

    /// Table count per level.
    fn levels(&self) -> Vec<usize> {
        let v = self.inner.version();
        (0..sepkv::version::NUM_LEVELS).map(|l| v.level(l).len()).collect()
    }

    fn __enter__(slf: Py<Self>) -> Py<Self> {
        slf
    }

    fn __exit__(
        &self,
        py: Python<'_>,
        _ty: Option<Bound<'_, PyAny>>,
        _value: Option<Bound<'_, PyAny>>,
        _tb: Option<Bound<'_, PyAny>>,
    ) -> PyResult<bool> {
        self.close(py)?;
        Ok(false)
    }
}

/// Runs one bench workload and returns its summary and counters.
#[pyfunction]
#[pyo3(signature = (
    pattern, dir, wal = "sync", value_size = 4096, key_size = 16, ops = None, bytes = None,
    mode = "separated", lanes = 4, threshold = 4096, seed = 42, memtable_size = 16 << 20,
    preload = 5000, interval_ms = 100, out = None
))]
#[allow(clippy::too_many_arguments)]
fn run_bench(
    py: Python<'_>,
    pattern: &str,
    dir: PathBuf,
    wal: &str,
    value_size: usize,
    key_size: usize,
    ops: Option<u64>,
    bytes: Option<u64>,
    mode: &str,
    lanes: usize,
    threshold: usize,
    seed: u64,
    memtable_size: usize,
    preload: u64,
    interval_ms: u64,
    out: Option<PathBuf>,
) -> PyResult<BTreeMap<String, String>> {
    let pattern = match pattern {
        "randwrite" => Pattern::RandomWrite,
        "seqwrite" => Pattern::SequentialWrite,
        "readrandom" => Pattern::ReadRandom,
        "ycsb-a" => Pattern::MixedYcsbA,
        _ => return Err(PyValueError::new_err(format!("unknown pattern {pattern:?}"))),
    };
    let spec = WorkloadSpec {
        pattern,
        wal_mode: parse_wal(wal)?,
        key_size,
        value_size,
        total_bytes: bytes.or(Some(64 << 20)),
        ops,
        preload,
        distribution: if pattern == Pattern::MixedYcsbA {
            KeyDist::Zipfian { theta: YCSB_THETA }
        } else {
            KeyDist::Uniform
        },
        separation: parse_separation(mode)?,
        lanes,
        threshold,
        seed,
        memtable_size,
        interval: Duration::from_millis(interval_ms.max(1)),
        ..Default::default()
    };
    let report = py.detach(|| bench::run(&spec, &dir, false)).map_err(to_py)?;
    if let Some(out) = out {
        report.write_to(&out).map_err(to_py)?;
    }
    let mut m: BTreeMap<String, String> = report
        .summary()
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_owned(), v.to_owned()))
        .collect();
    for (c, v) in report.metrics.iter() {
        m.insert(c.name().to_owned(), v.to_string());
    }
    Ok(m)
}

/// Value-log append MB/s per lane count: a list of `(lanes, mb_per_s, per-lane records)`.
#[pyfunction]
#[pyo3(signature = (dir, value_size = 65536, lanes = vec![1, 2, 4, 8], bytes = 64 << 20))]
fn compare_lanes(
    py: Python<'_>,
    dir: PathBuf,
    value_size: usize,
    lanes: Vec<usize>,
    bytes: u64,
) -> PyResult<Vec<(usize, f64, Vec<u64>)>> {
    let rows = py
        .detach(|| bench::compare_lanes(&dir, value_size, &lanes, bytes))
        .map_err(to_py)?;
    Ok(rows.into_iter().map(|r| (r.lanes, r.mb_per_sec, r.lane_records)).collect())
}

#[pymodule]
#[pyo3(name = "sepkv")]
fn sepkv_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyEngine>()?;
    m.add_function(wrap_pyfunction!(run_bench, m)?)?;
    m.add_function(wrap_pyfunction!(compare_lanes, m)?)?;
    m.add("SepkvError", m.py().get_type::<SepkvError>())?;
    Ok(())
}
