//! Workload driver for the `bench` binary: deterministic key/value streams,
//! latency percentiles and report files.

mod lanes;

pub use lanes::{compare_lanes, format_rows, LaneRow, CLIENTS, TRIALS};

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use sha2::{Digest, Sha256};

use crate::config::{Config, SeparationMode, WalMode, MIB};
use crate::engine::{Engine, WriteOptions};
use crate::error::{Error, Result};
use crate::metrics::{intervals_csv, IntervalPoint, MetricsSnapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    RandomWrite,
    SequentialWrite,
    ReadRandom,
    MixedYcsbA,
}

impl Pattern {
    pub fn name(self) -> &'static str {
        match self {
            Pattern::RandomWrite => "randwrite",
            Pattern::SequentialWrite => "seqwrite",
            Pattern::ReadRandom => "readrandom",
            Pattern::MixedYcsbA => "ycsb-a",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KeyDist {
    Uniform,
    Zipfian { theta: f64 },
}

pub const YCSB_THETA: f64 = 0.99;

#[derive(Debug, Clone)]
pub struct WorkloadSpec {
    pub pattern: Pattern,
    pub wal_mode: WalMode,
    pub key_size: usize,
    pub value_size: usize,
    /// User bytes to issue; converted to an op count of `bytes / (key + value)`.
    pub total_bytes: Option<u64>,
    /// Overrides `total_bytes` when set.
    pub ops: Option<u64>,
    /// Keeps issuing ops until this much time has passed, ignoring the op count.
    pub duration: Option<Duration>,
    /// Records loaded before a read or mixed phase.
    pub preload: u64,
    pub distribution: KeyDist,
    pub separation: SeparationMode,
    pub lanes: usize,
    pub threshold: usize,
    pub seed: u64,
    pub memtable_size: usize,
    /// L1 size target; the engine default when `None`.
    pub level1_target: Option<u64>,
    pub interval: Duration,
    /// Client threads. More than one makes the op stream nondeterministic.
    pub threads: usize,
    /// Hash every live key and value once the run ends.
    pub content_digest: bool,
    /// After the timed phase, flush and finish due compactions before the
    /// counters are read.
    pub settle: bool,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            pattern: Pattern::RandomWrite,
            wal_mode: WalMode::Sync,
            key_size: 16,
            value_size: 4096,
            total_bytes: Some(1 << 30),
            ops: None,
            duration: None,
            preload: 5_000,
            distribution: KeyDist::Uniform,
            separation: SeparationMode::Separated,
            lanes: 4,
            threshold: 4096,
            seed: 42,
            memtable_size: 16 * MIB,
            level1_target: None,
            interval: Duration::from_millis(100),
            threads: 1,
            content_digest: true,
            settle: true,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if self.key_size == 0 || self.value_size == 0 {
            return bad("key and value sizes must be positive");
        }
        if self.threads == 0 || self.lanes == 0 {
            return bad("threads and lanes must be positive");
        }
        if self.ops.is_none() && self.total_bytes.is_none() && self.duration.is_none() {
            return bad("one of ops, bytes or duration is required");
        }
        if self.ops == Some(0) || self.total_bytes == Some(0) {
            return bad("workload size must be positive");
        }
        if matches!(self.distribution, KeyDist::Zipfian { .. })
            && !matches!(self.pattern, Pattern::ReadRandom | Pattern::MixedYcsbA)
        {
            return bad("zipfian keys apply only to readrandom and ycsb-a");
        }
        if matches!(self.pattern, Pattern::ReadRandom | Pattern::MixedYcsbA) && self.preload == 0 {
            return bad("read workloads need a preload");
        }
        Ok(())
    }

    /// Ops in the measured phase, or `u64::MAX` for a timed run.
    pub fn op_count(&self) -> u64 {
        if self.duration.is_some() {
            return u64::MAX;
        }
        self.ops.unwrap_or_else(|| {
            let per_op = (self.key_size + self.value_size) as u64;
            (self.total_bytes.unwrap_or(0) / per_op).max(1)
        })
    }

    pub fn engine_config(&self) -> Config {
        let mut c = Config::with_memtable_size(self.memtable_size);
        c.wal_mode = self.wal_mode;
        c.separation = self.separation;
        c.bvalue_lanes = self.lanes;
        c.separation_threshold = self.threshold;
        c.metrics_interval = self.interval;
        if let Some(t) = self.level1_target {
            c.level1_size_target = t;
        }
        c.max_value_size = c.max_value_size.max(self.value_size);
        c
    }

    fn keyspace(&self, ops: u64) -> u64 {
        match self.pattern {
            Pattern::RandomWrite => ops.saturating_mul(2).max(1),
            Pattern::SequentialWrite => ops,
            Pattern::ReadRandom | Pattern::MixedYcsbA => self.preload,
        }
    }
}

/// Key `i` as a big-endian integer, zero-padded (or truncated from the left)
/// to `size` bytes.
pub fn make_key(i: u64, size: usize) -> Vec<u8> {
    let be = i.to_be_bytes();
    if size >= 8 {
        let mut k = vec![0u8; size - 8];
        k.extend_from_slice(&be);
        k
    } else {
        be[8 - size..].to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Put(u64),
    Get(u64),
}

/// Deterministic op and value source for one client.
struct Stream {
    rng: ChaCha8Rng,
    pattern: Pattern,
    keyspace: u64,
    zipf: Option<Zipf<f64>>,
    next_seq: u64,
}

impl Stream {
    fn new(spec: &WorkloadSpec, seed: u64, keyspace: u64, seq_start: u64) -> Result<Self> {
        let zipf = match spec.distribution {
            KeyDist::Zipfian { theta } => Some(
                Zipf::new(keyspace as f64, theta).map_err(|e| Error::Config(format!("zipf: {e}")))?,
            ),
            KeyDist::Uniform => None,
        };
        Ok(Stream {
            rng: ChaCha8Rng::seed_from_u64(seed),
            pattern: spec.pattern,
            keyspace,
            zipf,
            next_seq: seq_start,
        })
    }

    fn key(&mut self) -> u64 {
        match &self.zipf {
            // Rank 1 is the hottest key.
            Some(z) => (z.sample(&mut self.rng) as u64).saturating_sub(1).min(self.keyspace - 1),
            None => self.rng.random_range(0..self.keyspace),
        }
    }

    fn next(&mut self) -> Op {
        match self.pattern {
            Pattern::SequentialWrite => {
                self.next_seq += 1;
                Op::Put(self.next_seq - 1)
            }
            Pattern::RandomWrite => Op::Put(self.key()),
            Pattern::ReadRandom => Op::Get(self.key()),
            Pattern::MixedYcsbA => {
                let read = self.rng.random_bool(0.5);
                let k = self.key();
                if read {
                    Op::Get(k)
                } else {
                    Op::Put(k)
                }
            }
        }
    }

    fn fill(&mut self, buf: &mut [u8]) {
        self.rng.fill_bytes(buf);
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub pattern: Pattern,
    pub ops: u64,
    pub puts: u64,
    pub gets: u64,
    pub misses: u64,
    pub elapsed: Duration,
    pub user_bytes: u64,
    pub p50_us: f64,
    pub p95_us: f64,
    pub p99_us: f64,
    /// SHA-256 over the issued op stream; `None` with several clients.
    pub op_digest: Option<String>,
    pub content_digest: Option<String>,
    pub metrics: MetricsSnapshot,
    pub intervals: Vec<IntervalPoint>,
}

impl Report {
    pub fn ops_per_sec(&self) -> f64 {
        self.ops as f64 / self.elapsed.as_secs_f64().max(1e-9)
    }

    pub fn mb_per_sec(&self) -> f64 {
        self.user_bytes as f64 / 1e6 / self.elapsed.as_secs_f64().max(1e-9)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "pattern={}", self.pattern.name());
        let _ = writeln!(s, "ops={}", self.ops);
        let _ = writeln!(s, "puts={}", self.puts);
        let _ = writeln!(s, "gets={}", self.gets);
        let _ = writeln!(s, "get_misses={}", self.misses);
        let _ = writeln!(s, "elapsed_s={:.3}", self.elapsed.as_secs_f64());
        let _ = writeln!(s, "ops_per_s={:.1}", self.ops_per_sec());
        let _ = writeln!(s, "mb_per_s={:.3}", self.mb_per_sec());
        let _ = writeln!(s, "p50_us={:.1}", self.p50_us);
        let _ = writeln!(s, "p95_us={:.1}", self.p95_us);
        let _ = writeln!(s, "p99_us={:.1}", self.p99_us);
        let _ = writeln!(s, "write_amplification={:.4}", self.metrics.write_amplification());
        let _ = writeln!(s, "op_digest={}", self.op_digest.as_deref().unwrap_or("-"));
        let _ = writeln!(s, "content_digest={}", self.content_digest.as_deref().unwrap_or("-"));
        s
    }

    /// Writes `summary.txt`, `intervals.csv` and `metrics.txt` into `out`.
    pub fn write_to(&self, out: &Path) -> Result<()> {
        fs::create_dir_all(out)?;
        fs::write(out.join("summary.txt"), self.summary())?;
        fs::write(out.join("intervals.csv"), intervals_csv(&self.intervals))?;
        fs::write(out.join("metrics.txt"), self.metrics.to_text())?;
        Ok(())
    }
}

fn percentile(sorted: &[u32], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1] as f64
}

struct ClientResult {
    puts: u64,
    gets: u64,
    misses: u64,
    user_bytes: u64,
    latencies: Vec<u32>,
    written: BTreeSet<u64>,
    hasher: Sha256,
}

fn client(
    db: &Engine,
    spec: &WorkloadSpec,
    mut stream: Stream,
    ops: u64,
    deadline: Option<Instant>,
) -> Result<ClientResult> {
    let mut r = ClientResult {
        puts: 0,
        gets: 0,
        misses: 0,
        user_bytes: 0,
        latencies: Vec::with_capacity(ops.min(1 << 22) as usize),
        written: BTreeSet::new(),
        hasher: Sha256::new(),
    };
    let mut value = vec![0u8; spec.value_size];
    let opts = WriteOptions::default();
    let mut i = 0u64;
    while i < ops {
        if deadline.is_some_and(|d| i.is_multiple_of(16) && Instant::now() >= d) {
            break;
        }
        let op = stream.next();
        let t = Instant::now();
        match op {
            Op::Put(k) => {
                stream.fill(&mut value);
                let key = make_key(k, spec.key_size);
                db.put(&key, &value, opts)
                    .map_err(|e| e.at_op(i))?;
                r.hasher.update([0u8]);
                r.hasher.update(&key);
                r.hasher.update(&value);
                r.puts += 1;
                r.user_bytes += (key.len() + value.len()) as u64;
                r.written.insert(k);
            }
            Op::Get(k) => {
                let key = make_key(k, spec.key_size);
                let got = db
                    .get(&key)
                    .map_err(|e| e.at_op(i))?;
                db.metrics().record_op(0);
                r.hasher.update([1u8]);
                r.hasher.update(&key);
                r.gets += 1;
                if got.is_none() {
                    r.misses += 1;
                }
            }
        }
        r.latencies.push(t.elapsed().as_micros().min(u32::MAX as u128) as u32);
        i += 1;
    }
    Ok(r)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn dir_is_empty(dir: &Path) -> Result<bool> {
    match fs::read_dir(dir) {
        Ok(mut it) => Ok(it.next().is_none()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(true),
        Err(e) => Err(e.into()),
    }
}

/// Runs `spec` against a store in `dir`. `dir` must be empty unless `reuse`
/// is set.
pub fn run(spec: &WorkloadSpec, dir: &Path, reuse: bool) -> Result<Report> {
    spec.validate()?;
    if !reuse && !dir_is_empty(dir)? {
        return Err(Error::Config(format!("{} is not empty", dir.display())));
    }
    let db = Engine::open(dir, spec.engine_config())?;
    let ops = spec.op_count();
    let keyspace = spec.keyspace(if ops == u64::MAX { 1 << 20 } else { ops });

    let mut written = BTreeSet::new();
    if matches!(spec.pattern, Pattern::ReadRandom | Pattern::MixedYcsbA) {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed);
        let mut value = vec![0u8; spec.value_size];
        for k in 0..spec.preload {
            rng.fill_bytes(&mut value);
            db.put(&make_key(k, spec.key_size), &value, WriteOptions::default())
                .map_err(|e| e.at_op(k))?;
            written.insert(k);
        }
        db.flush()?;
    }

    let user_before = db.stats().get(crate::metrics::Counter::UserBytesIn);
    db.metrics().restart_intervals();
    let deadline = spec.duration.map(|d| Instant::now() + d);
    let start = Instant::now();
    let results: Vec<ClientResult> = if spec.threads == 1 {
        let stream = Stream::new(spec, spec.seed, keyspace, 0)?;
        vec![client(&db, spec, stream, ops, deadline)?]
    } else {
        let per = if ops == u64::MAX { ops } else { ops.div_ceil(spec.threads as u64) };
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..spec.threads as u64)
                .map(|t| {
                    let n = if per == u64::MAX { per } else { per.min(ops.saturating_sub(t * per)) };
                    let db = &db;
                    s.spawn(move || {
                        let stream = Stream::new(spec, spec.seed.wrapping_add(t), keyspace, t * per)?;
                        client(db, spec, stream, n, deadline)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("client thread panicked"))
                .collect::<Result<Vec<_>>>()
        })?
    };
    let elapsed = start.elapsed();
    if spec.settle {
        db.settle()?;
    }

    let mut latencies = Vec::new();
    let (mut puts, mut gets, mut misses, mut user_bytes) = (0, 0, 0, 0);
    let single = results.len() == 1;
    let mut op_digest = None;
    for r in results {
        puts += r.puts;
        gets += r.gets;
        misses += r.misses;
        user_bytes += r.user_bytes;
        latencies.extend(r.latencies);
        written.extend(r.written);
        if single {
            op_digest = Some(hex(&r.hasher.finalize()));
        }
    }
    latencies.sort_unstable();
    debug_assert_eq!(
        db.stats().get(crate::metrics::Counter::UserBytesIn) - user_before,
        user_bytes
    );

    let content_digest = if spec.content_digest {
        let mut h = Sha256::new();
        for &k in &written {
            let key = make_key(k, spec.key_size);
            if let Some(v) = db.get(&key)? {
                h.update((key.len() as u32).to_le_bytes());
                h.update(&key);
                h.update((v.len() as u32).to_le_bytes());
                h.update(&v);
            }
        }
        Some(hex(&h.finalize()))
    } else {
        None
    };

    let report = Report {
        pattern: spec.pattern,
        ops: puts + gets,
        puts,
        gets,
        misses,
        elapsed,
        user_bytes,
        p50_us: percentile(&latencies, 50.0),
        p95_us: percentile(&latencies, 95.0),
        p99_us: percentile(&latencies, 99.0),
        op_digest,
        content_digest,
        metrics: db.stats(),
        intervals: db.metrics().interval_series(),
    };
    db.close()?;
    Ok(report)
}

/// Default data directory for a run that names none.
pub fn default_dir(spec: &WorkloadSpec) -> PathBuf {
    PathBuf::from(format!("bench-data-{}-{}", spec.pattern.name(), spec.seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_are_padded_big_endian() {
        assert_eq!(make_key(1, 16), [[0u8; 15].as_slice(), &[1]].concat());
        assert_eq!(make_key(0x0102, 2), vec![1, 2]);
        assert!(make_key(5, 16) < make_key(6, 16));
    }

    #[test]
    fn percentiles_use_nearest_rank() {
        let v: Vec<u32> = (1..=100).collect();
        assert_eq!(percentile(&v, 50.0), 50.0);
        assert_eq!(percentile(&v, 99.0), 99.0);
        assert_eq!(percentile(&[], 50.0), 0.0);
    }

    #[test]
    fn zipf_keys_stay_in_range() {
        let spec = WorkloadSpec {
            pattern: Pattern::MixedYcsbA,
            distribution: KeyDist::Zipfian { theta: YCSB_THETA },
            ..Default::default()
        };
        let mut s = Stream::new(&spec, 1, 100, 0).unwrap();
        let mut hot = 0;
        for _ in 0..10_000 {
            let k = match s.next() {
                Op::Get(k) | Op::Put(k) => k,
            };
            assert!(k < 100);
            hot += (k == 0) as u32;
        }
        // Rank 1 of 100 at theta 0.99 draws roughly 19% of samples.
        assert!(hot > 1_000, "{hot}");
    }

    #[test]
    fn streams_are_deterministic() {
        let spec = WorkloadSpec::default();
        let mut a = Stream::new(&spec, 7, 1000, 0).unwrap();
        let mut b = Stream::new(&spec, 7, 1000, 0).unwrap();
        for _ in 0..100 {
            assert_eq!(a.next(), b.next());
        }
    }

    #[test]
    fn zipfian_rejected_for_writes() {
        let spec = WorkloadSpec {
            distribution: KeyDist::Zipfian { theta: YCSB_THETA },
            ..Default::default()
        };
        assert!(spec.validate().is_err());
    }
}
