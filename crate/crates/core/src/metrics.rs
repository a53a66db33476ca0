//! Byte-level accounting: monotone counters, write amplification, and a
//! bucketed throughput series.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use parking_lot::Mutex;

use crate::error::{Error, Result};

macro_rules! counters {
    ($($variant:ident => $name:literal),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum Counter {
            $($variant),*
        }

        impl Counter {
            pub const ALL: &'static [Counter] = &[$(Counter::$variant),*];

            pub fn name(self) -> &'static str {
                match self {
                    $(Counter::$variant => $name),*
                }
            }

            pub fn from_name(name: &str) -> Option<Counter> {
                match name {
                    $($name => Some(Counter::$variant),)*
                    _ => None,
                }
            }
        }
    };
}

counters! {
    UserBytesIn => "user_bytes_in",
    WalBytes => "wal_bytes",
    BvalueBytes => "bvalue_bytes",
    FlushBytes => "flush_bytes",
    CompactionReadBytes => "compaction_read_bytes",
    CompactionWriteBytes => "compaction_write_bytes",
    BvalueDeadBytes => "bvalue_dead_bytes",
    CacheHits => "cache_hits",
    CacheMisses => "cache_misses",
    CachePinRejects => "cache_pin_rejects",
    StallMicros => "stall_micros",
    BvalueAppends => "bvalue_appends",
    BvalueReads => "bvalue_reads",
    BvalueReadsInCompaction => "bvalue_reads_in_compaction",
    SstBlocksRead => "sst_blocks_read",
    Puts => "puts",
    Gets => "gets",
    Deletes => "deletes",
    Flushes => "flushes",
    Compactions => "compactions",
}

const COUNTERS: usize = Counter::ALL.len();

pub const DEFAULT_INTERVAL: Duration = Duration::from_secs(10);
const MAX_BUCKETS: usize = 1 << 20;

const MB: f64 = 1_000_000.0;

#[derive(Debug)]
struct Intervals {
    start: Instant,
    width: Duration,
    /// Index of `buckets[0]`; older buckets fall off once the ring is full.
    first: u64,
    buckets: Vec<(u64, u64)>,
}

impl Intervals {
    fn add(&mut self, elapsed: Duration, bytes: u64, ops: u64) {
        let idx = (elapsed.as_nanos() / self.width.as_nanos().max(1)) as u64;
        if idx < self.first {
            return;
        }
        let rel = (idx - self.first) as usize;
        if rel >= self.buckets.len() {
            self.buckets.resize(rel + 1, (0, 0));
        }
        self.buckets[rel].0 += bytes;
        self.buckets[rel].1 += ops;
        if self.buckets.len() > MAX_BUCKETS {
            let drop = self.buckets.len() - MAX_BUCKETS;
            self.buckets.drain(..drop);
            self.first += drop as u64;
        }
    }
}

/// One row of the throughput series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalPoint {
    pub bucket_start_s: f64,
    pub bytes: u64,
    pub ops: u64,
    pub instant_mb_s: f64,
    pub cumavg_mb_s: f64,
    pub ops_s: f64,
}

#[derive(Debug)]
pub struct Metrics {
    counters: [AtomicU64; COUNTERS],
    intervals: Mutex<Intervals>,
}

impl Default for Metrics {
    fn default() -> Self {
        Metrics::new(DEFAULT_INTERVAL)
    }
}

impl Metrics {
    pub fn new(bucket_width: Duration) -> Self {
        assert!(!bucket_width.is_zero(), "bucket width must be positive");
        Metrics {
            counters: std::array::from_fn(|_| AtomicU64::new(0)),
            intervals: Mutex::new(Intervals {
                start: Instant::now(),
                width: bucket_width,
                first: 0,
                buckets: Vec::new(),
            }),
        }
    }

    #[inline]
    pub fn add(&self, counter: Counter, delta: u64) {
        if delta != 0 {
            self.counters[counter as usize].fetch_add(delta, Ordering::Relaxed);
        }
    }

    #[inline]
    pub fn get(&self, counter: Counter) -> u64 {
        self.counters[counter as usize].load(Ordering::Relaxed)
    }

    /// Adds `delta` to the counter called `name`.
    pub fn record(&self, name: &str, delta: u64) -> Result<()> {
        let c = Counter::from_name(name).ok_or_else(|| Error::UnknownCounter(name.to_owned()))?;
        self.add(c, delta);
        Ok(())
    }

    pub fn snapshot(&self) -> MetricsSnapshot {
        let mut values = [0u64; COUNTERS];
        for (slot, c) in values.iter_mut().zip(&self.counters) {
            *slot = c.load(Ordering::Relaxed);
        }
        MetricsSnapshot { values }
    }

    /// Credits one completed operation of `bytes` user bytes to the current bucket.
    pub fn record_op(&self, bytes: u64) {
        let mut iv = self.intervals.lock();
        let elapsed = iv.start.elapsed();
        iv.add(elapsed, bytes, 1);
    }

    pub fn record_op_at(&self, elapsed: Duration, bytes: u64, ops: u64) {
        self.intervals.lock().add(elapsed, bytes, ops);
    }

    /// Re-anchors bucket 0 at the current instant and clears the series.
    pub fn restart_intervals(&self) {
        let mut iv = self.intervals.lock();
        iv.start = Instant::now();
        iv.first = 0;
        iv.buckets.clear();
    }

    pub fn bucket_width(&self) -> Duration {
        self.intervals.lock().width
    }

    /// Instantaneous and cumulative-average throughput per bucket, from the
    /// first retained bucket through the last non-empty one.
    pub fn interval_series(&self) -> Vec<IntervalPoint> {
        let iv = self.intervals.lock();
        let width = iv.width.as_secs_f64();
        let mut out = Vec::with_capacity(iv.buckets.len());
        let mut total = 0u64;
        for (i, &(bytes, ops)) in iv.buckets.iter().enumerate() {
            total += bytes;
            let elapsed = (i + 1) as f64 * width;
            out.push(IntervalPoint {
                bucket_start_s: (iv.first + i as u64) as f64 * width,
                bytes,
                ops,
                instant_mb_s: bytes as f64 / MB / width,
                cumavg_mb_s: total as f64 / MB / elapsed,
                ops_s: ops as f64 / width,
            });
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricsSnapshot {
    values: [u64; COUNTERS],
}

impl MetricsSnapshot {
    pub fn get(&self, c: Counter) -> u64 {
        self.values[c as usize]
    }

    pub fn by_name(&self, name: &str) -> Result<u64> {
        Counter::from_name(name)
            .map(|c| self.get(c))
            .ok_or_else(|| Error::UnknownCounter(name.to_owned()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Counter, u64)> + '_ {
        Counter::ALL.iter().map(|&c| (c, self.get(c)))
    }

    /// (wal + bvalue + flush + compaction writes) / user bytes; 0 before any write.
    pub fn write_amplification(&self) -> f64 {
        let user = self.get(Counter::UserBytesIn);
        if user == 0 {
            return 0.0;
        }
        let written = self.get(Counter::WalBytes)
            + self.get(Counter::BvalueBytes)
            + self.get(Counter::FlushBytes)
            + self.get(Counter::CompactionWriteBytes);
        written as f64 / user as f64
    }

    /// Flat `name=value` block, one counter per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (c, v) in self.iter() {
            let _ = writeln!(out, "{}={}", c.name(), v);
        }
        let _ = writeln!(out, "write_amplification={:.6}", self.write_amplification());
        out
    }
}

pub const INTERVAL_CSV_HEADER: &str = "bucket_start_s,instant_mb_s,cumavg_mb_s,ops_s";

pub fn intervals_csv(series: &[IntervalPoint]) -> String {
    let mut out = String::from(INTERVAL_CSV_HEADER);
    out.push('\n');
    for p in series {
        let _ = writeln!(
            out,
            "{:.3},{:.6},{:.6},{:.3}",
            p.bucket_start_s, p.instant_mb_s, p.cumavg_mb_s, p.ops_s
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn empty_registry() {
        let m = Metrics::default();
        assert!(m.interval_series().is_empty());
        let s = m.snapshot();
        assert!(s.iter().all(|(_, v)| v == 0));
        assert_eq!(s.write_amplification(), 0.0);
    }

    #[test]
    fn unknown_counter_is_an_error() {
        let m = Metrics::default();
        assert!(matches!(m.record("nope", 1), Err(Error::UnknownCounter(_))));
        m.record("wal_bytes", 5).unwrap();
        assert_eq!(m.snapshot().by_name("wal_bytes").unwrap(), 5);
    }

    #[test]
    fn hundred_mb_in_ten_seconds_is_ten_mb_per_second() {
        let m = Metrics::new(Duration::from_secs(10));
        m.record_op_at(Duration::from_secs(3), 100_000_000, 1);
        let s = m.interval_series();
        assert_eq!(s.len(), 1);
        assert!((s[0].instant_mb_s - 10.0).abs() < 1e-12);
    }

    #[test]
    fn cumulative_average_matches_recomputation() {
        let width = Duration::from_millis(100);
        let m = Metrics::new(width);
        let writes: Vec<(u64, u64)> = (0..50).map(|i| ((i * 37) % 23, (i * 7919) % 5000 + 1)).collect();
        for &(bucket, bytes) in &writes {
            m.record_op_at(width * bucket as u32 + Duration::from_millis(5), bytes, 1);
        }
        let series = m.interval_series();
        let last = writes.iter().map(|w| w.0).max().unwrap();
        assert_eq!(series.len() as u64, last + 1);
        for (k, p) in series.iter().enumerate() {
            let total: u64 = writes.iter().filter(|w| w.0 <= k as u64).map(|w| w.1).sum();
            let expected = total as f64 / MB / ((k + 1) as f64 * 0.1);
            assert!((p.cumavg_mb_s - expected).abs() < 1e-9, "bucket {k}");
        }
        let bucket_sum: u64 = series.iter().map(|p| p.bytes).sum();
        assert_eq!(bucket_sum, writes.iter().map(|w| w.1).sum::<u64>());
    }

    #[test]
    fn write_amplification_formula() {
        let m = Metrics::default();
        m.add(Counter::UserBytesIn, 100);
        m.add(Counter::WalBytes, 10);
        m.add(Counter::BvalueBytes, 100);
        m.add(Counter::FlushBytes, 20);
        m.add(Counter::CompactionWriteBytes, 70);
        m.add(Counter::CompactionReadBytes, 1000);
        assert!((m.snapshot().write_amplification() - 2.0).abs() < 1e-12);
        let text = m.snapshot().to_text();
        assert!(text.contains("user_bytes_in=100\n"));
        assert!(text.contains("write_amplification=2.000000\n"));
    }

    #[test]
    fn counters_monotone_under_parallel_recorders() {
        let m = Arc::new(Metrics::default());
        let stop = Arc::new(std::sync::atomic::AtomicBool::new(false));
        let watcher = {
            let (m, stop) = (m.clone(), stop.clone());
            std::thread::spawn(move || {
                let mut prev = 0;
                while !stop.load(Ordering::Relaxed) {
                    let now = m.get(Counter::WalBytes);
                    assert!(now >= prev);
                    prev = now;
                }
            })
        };
        let writers: Vec<_> = (0..4)
            .map(|_| {
                let m = m.clone();
                std::thread::spawn(move || {
                    for _ in 0..10_000 {
                        m.add(Counter::WalBytes, 3);
                        m.record_op(3);
                    }
                })
            })
            .collect();
        for w in writers {
            w.join().unwrap();
        }
        stop.store(true, Ordering::Relaxed);
        watcher.join().unwrap();
        assert_eq!(m.get(Counter::WalBytes), 120_000);
        let ops: u64 = m.interval_series().iter().map(|p| p.ops).sum();
        assert_eq!(ops, 40_000);
    }

    #[test]
    fn csv_layout() {
        let m = Metrics::new(Duration::from_secs(1));
        m.record_op_at(Duration::from_millis(1500), 2_000_000, 4);
        let csv = intervals_csv(&m.interval_series());
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], INTERVAL_CSV_HEADER);
        assert_eq!(lines[1], "0.000,0.000000,0.000000,0.000");
        assert_eq!(lines[2], "1.000,2.000000,1.000000,4.000");
    }
}
