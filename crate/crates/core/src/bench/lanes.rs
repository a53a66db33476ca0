//! Big-value append throughput per lane count, measured on the value store
//! alone.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bvstore::BValueStore;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::fault::Faults;
use crate::metrics::Metrics;
use crate::types::Key;

/// Concurrent appenders per trial. Fixed so only the lane count varies.
pub const CLIENTS: usize = 4;
/// Trials per lane count; the median is reported.
pub const TRIALS: usize = 3;

#[derive(Debug, Clone)]
pub struct LaneRow {
    pub lanes: usize,
    pub mb_per_sec: f64,
    /// Records per lane from the median trial.
    pub lane_records: Vec<u64>,
}

impl LaneRow {
    /// Largest gap between two lanes' record counts.
    pub fn imbalance(&self) -> u64 {
        let max = self.lane_records.iter().max().copied().unwrap_or(0);
        let min = self.lane_records.iter().min().copied().unwrap_or(0);
        max - min
    }
}

fn trial(dir: &Path, lanes: usize, value_size: usize, records: u64) -> Result<(f64, Vec<u64>)> {
    let mut config = Config::default();
    config.bvalue_lanes = lanes;
    config.max_value_size = config.max_value_size.max(value_size);
    let store = BValueStore::open(dir, &config, Arc::new(Metrics::default()), Faults::none())?;
    let mut value = vec![0u8; value_size];
    ChaCha8Rng::seed_from_u64(lanes as u64).fill_bytes(&mut value);
    let next = AtomicU64::new(0);
    let start = Instant::now();
    std::thread::scope(|s| {
        let workers: Vec<_> = (0..CLIENTS)
            .map(|_| {
                s.spawn(|| -> Result<()> {
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= records {
                            return Ok(());
                        }
                        let key = Key::new(i.to_be_bytes())?;
                        store.append(&key, &value, true)?;
                    }
                })
            })
            .collect();
        workers
            .into_iter()
            .try_for_each(|w| w.join().expect("append worker panicked"))
    })?;
    let secs = start.elapsed().as_secs_f64().max(1e-9);
    let counts = store.lane_record_counts();
    store.close()?;
    Ok((records as f64 * value_size as f64 / 1e6 / secs, counts))
}

/// Appends `total_bytes` of `value_size` values with durable writes once per
/// entry of `lanes`, under `base`.
pub fn compare_lanes(base: &Path, value_size: usize, lanes: &[usize], total_bytes: u64) -> Result<Vec<LaneRow>> {
    if lanes.is_empty() || lanes.contains(&0) {
        return Err(Error::Config("lane list must be non-empty and positive".into()));
    }
    if value_size == 0 {
        return Err(Error::Config("value size must be positive".into()));
    }
    let records = (total_bytes / value_size as u64).max(1);
    let mut rows = Vec::new();
    for &n in lanes {
        let mut trials = Vec::with_capacity(TRIALS);
        for t in 0..TRIALS {
            let dir = base.join(format!("lanes-{n}-trial-{t}"));
            if dir.exists() {
                std::fs::remove_dir_all(&dir)?;
            }
            let r = trial(&dir, n, value_size, records);
            let _ = std::fs::remove_dir_all(&dir);
            trials.push(r?);
        }
        trials.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (mb_per_sec, lane_records) = trials.swap_remove(TRIALS / 2);
        rows.push(LaneRow {
            lanes: n,
            mb_per_sec,
            lane_records,
        });
    }
    Ok(rows)
}

/// Text table with each row's speed-up over the first row.
pub fn format_rows(rows: &[LaneRow]) -> String {
    let base = rows.first().map(|r| r.mb_per_sec).unwrap_or(0.0);
    let mut out = String::from("lanes,mb_per_s,ratio_vs_first,lane_records\n");
    for r in rows {
        let ratio = if base > 0.0 { r.mb_per_sec / base } else { 0.0 };
        let counts: Vec<String> = r.lane_records.iter().map(u64::to_string).collect();
        out.push_str(&format!("{},{:.3},{:.3},{}\n", r.lanes, r.mb_per_sec, ratio, counts.join(" ")));
    }
    out
}
