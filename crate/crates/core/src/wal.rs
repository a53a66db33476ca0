//! Write-ahead log segments: `wal/<segment:020>.log`, each a back-to-back
//! run of checksummed envelopes around encoded entries.
//!
//! `Sync` appends are written and synced before returning. `Async` appends
//! land in a tail buffer that [`Wal::drain`] writes out; the drain first runs
//! the barrier installed at construction (the engine passes the value-log
//! sync) so a logged pointer never outlives the bytes it points to.

use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::Mutex;

use crate::codec::{self, RecordScan};
use crate::config::WalMode;
use crate::error::{Error, Result};
use crate::fault::Faults;
use crate::metrics::{Counter, Metrics};
use crate::types::InternalEntry;

pub type DrainBarrier = Box<dyn Fn() -> Result<()> + Send + Sync>;

pub fn segment_path(dir: &Path, id: u64) -> PathBuf {
    dir.join(format!("{id:020}.log"))
}

/// Segment ids present in `dir`, ascending.
pub fn list_segments(dir: &Path) -> Result<Vec<u64>> {
    let mut ids = Vec::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(id) = name.strip_suffix(".log").and_then(|s| s.parse::<u64>().ok()) {
            ids.push(id);
        }
    }
    ids.sort_unstable();
    Ok(ids)
}

struct Segment {
    id: u64,
    path: PathBuf,
    file: File,
    len: u64,
    failed: bool,
}

pub struct Wal {
    dir: PathBuf,
    /// Owns the open segment; every file write happens under this lock.
    writer: Mutex<Segment>,
    tail: Mutex<Vec<u8>>,
    closed: Mutex<bool>,
    barrier: DrainBarrier,
    buffer_limit: usize,
    metrics: Arc<Metrics>,
    faults: Faults,
}

impl Wal {
    /// Starts a fresh segment `segment_id` in `dir`.
    pub fn create(
        dir: &Path,
        segment_id: u64,
        buffer_limit: usize,
        barrier: DrainBarrier,
        metrics: Arc<Metrics>,
        faults: Faults,
    ) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let segment = open_segment(dir, segment_id, &faults)?;
        Ok(Wal {
            dir: dir.to_path_buf(),
            writer: Mutex::new(segment),
            tail: Mutex::new(Vec::new()),
            closed: Mutex::new(false),
            barrier,
            buffer_limit,
            metrics,
            faults,
        })
    }

    pub fn current_segment(&self) -> u64 {
        self.writer.lock().id
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn check_open(&self) -> Result<()> {
        if *self.closed.lock() {
            return Err(Error::LogClosed);
        }
        Ok(())
    }

    /// Logs `entry` under `mode`, returning the bytes added to the log.
    pub fn append(&self, entry: &InternalEntry, mode: WalMode) -> Result<usize> {
        if mode == WalMode::Disabled {
            return Ok(0);
        }
        self.check_open()?;
        let payload = codec::encode_entry(entry);
        let mut record = Vec::with_capacity(codec::RECORD_HEADER_LEN + payload.len());
        codec::encode_record_into(&payload, &mut record);
        let n = record.len();
        match mode {
            WalMode::Sync => {
                let mut seg = self.writer.lock();
                let mut pending = std::mem::take(&mut *self.tail.lock());
                if !pending.is_empty() {
                    (self.barrier)()?;
                }
                pending.extend_from_slice(&record);
                self.write_and_sync(&mut seg, &pending, "wal.append")?;
            }
            WalMode::Async => {
                let over = {
                    let mut tail = self.tail.lock();
                    tail.extend_from_slice(&record);
                    tail.len() >= self.buffer_limit
                };
                if over {
                    self.drain()?;
                }
            }
            WalMode::Disabled => unreachable!(),
        }
        self.metrics.add(Counter::WalBytes, n as u64);
        Ok(n)
    }

    fn write_and_sync(&self, seg: &mut Segment, bytes: &[u8], point: &'static str) -> Result<()> {
        if seg.failed {
            return Err(Error::LogClosed);
        }
        let res = self
            .faults
            .write(&mut seg.file, bytes, point)
            .and_then(|_| {
                seg.len += bytes.len() as u64;
                self.faults.sync(&seg.file, &seg.path, seg.len, "wal.sync")
            });
        if res.is_err() {
            // A partially written batch would leave a hole; refuse further appends.
            seg.failed = true;
        }
        res
    }

    /// Writes out the async tail buffer, running the barrier first.
    pub fn drain(&self) -> Result<()> {
        let mut seg = self.writer.lock();
        self.drain_locked(&mut seg)
    }

    fn drain_locked(&self, seg: &mut Segment) -> Result<()> {
        let pending = std::mem::take(&mut *self.tail.lock());
        if pending.is_empty() {
            return Ok(());
        }
        if let Err(e) = (self.barrier)() {
            seg.failed = true;
            return Err(e);
        }
        self.write_and_sync(seg, &pending, "wal.drain")
    }

    pub fn has_pending(&self) -> bool {
        !self.tail.lock().is_empty()
    }

    /// Drains, then switches appends to a fresh segment. Returns the old id.
    pub fn rotate(&self, new_segment_id: u64) -> Result<u64> {
        self.check_open()?;
        let mut seg = self.writer.lock();
        self.drain_locked(&mut seg)?;
        if seg.failed {
            return Err(Error::LogClosed);
        }
        assert!(new_segment_id > seg.id, "segment ids must increase");
        self.faults.hit("wal.rotate")?;
        let next = open_segment(&self.dir, new_segment_id, &self.faults)?;
        let old = std::mem::replace(&mut *seg, next);
        Ok(old.id)
    }

    /// Drains and refuses further appends.
    pub fn close(&self) -> Result<()> {
        let res = self.drain();
        *self.closed.lock() = true;
        res
    }
}

fn open_segment(dir: &Path, id: u64, faults: &Faults) -> Result<Segment> {
    let path = segment_path(dir, id);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)?;
    let len = file.metadata()?.len();
    faults.created(&path);
    Ok(Segment {
        id,
        path,
        file,
        len,
        failed: false,
    })
}

pub fn remove_segment(dir: &Path, id: u64) -> Result<()> {
    match fs::remove_file(segment_path(dir, id)) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReplaySummary {
    pub records_ok: usize,
    pub truncated: bool,
    pub valid_len: u64,
}

/// Feeds every verified entry of the log at `path` to `visit`, in file order,
/// stopping at the first torn or corrupt record.
pub fn replay<F>(path: &Path, mut visit: F) -> Result<ReplaySummary>
where
    F: FnMut(InternalEntry) -> Result<()>,
{
    let bytes = fs::read(path)?;
    replay_bytes(&bytes, &mut visit)
}

pub fn replay_bytes<F>(bytes: &[u8], visit: &mut F) -> Result<ReplaySummary>
where
    F: FnMut(InternalEntry) -> Result<()>,
{
    let mut entries = Vec::new();
    let mut ends = Vec::new();
    let scan: RecordScan = codec::scan_records(bytes, |payload| {
        entries.push(payload);
        Ok(())
    })?;
    let mut pos = 0usize;
    for payload in &entries {
        pos += codec::RECORD_HEADER_LEN + payload.len();
        ends.push(pos);
    }
    let mut summary = ReplaySummary::default();
    for (payload, end) in entries.into_iter().zip(ends) {
        match codec::decode_entry(payload) {
            Ok(e) => {
                visit(e)?;
                summary.records_ok += 1;
                summary.valid_len = end as u64;
            }
            Err(_) => {
                summary.truncated = true;
                return Ok(summary);
            }
        }
    }
    summary.truncated = scan.truncated;
    Ok(summary)
}
