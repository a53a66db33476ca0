//! The store: separation decision, ordered durability, memtable lifecycle,
//! flush, compaction and recovery.
//!
//! Directory layout:
//!
//! ```text
//! <dir>/CURRENT  <dir>/MANIFEST  <dir>/wal/  <dir>/bvalue/  <dir>/sst/
//! ```

mod background;

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use parking_lot::{Condvar, Mutex, RwLock};

use crate::bvcache::BVCache;
use crate::bvstore::BValueStore;
use crate::config::{Config, WalMode};
use crate::error::{Error, Result};
use crate::fault::Faults;
use crate::memtable::MemTable;
use crate::metrics::{Counter, Metrics, MetricsSnapshot};
use crate::sstable::{table_path, BuildOptions, TableBuilder};
use crate::types::{InternalEntry, Key, Kind, Payload, SequenceNumber};
use crate::version::compaction::{self, dedupe_newest};
use crate::version::{Version, VersionEdit, VersionSet};
use crate::wal::{self, Wal};

/// Per-write overrides.
#[derive(Debug, Clone, Copy, Default)]
pub struct WriteOptions {
    pub wal_mode: Option<WalMode>,
}

impl WriteOptions {
    pub fn with_wal(mode: WalMode) -> Self {
        WriteOptions {
            wal_mode: Some(mode),
        }
    }
}

struct Sealed {
    table: Arc<MemTable>,
    /// Last WAL segment holding this table's records.
    wal_segment: u64,
}

struct MemState {
    mutable: Arc<MemTable>,
    /// Newest first.
    immutable: VecDeque<Sealed>,
}

#[derive(Default)]
struct BgState {
    shutdown: bool,
    compact_pending: bool,
    error: Option<String>,
}

struct Commit {
    last_seq: SequenceNumber,
    next_wal_segment: u64,
}

pub(crate) struct Inner {
    dir: PathBuf,
    config: Config,
    metrics: Arc<Metrics>,
    faults: Faults,
    bv: Arc<BValueStore>,
    cache: Arc<BVCache>,
    vset: VersionSet,
    wal: Wal,
    commit: Mutex<Commit>,
    mem: RwLock<MemState>,
    bg: Mutex<BgState>,
    bg_cv: Condvar,
    failed: AtomicBool,
    closed: AtomicBool,
    compaction_lock: Mutex<()>,
    visible_seq: AtomicU64,
}

pub struct Engine {
    inner: Arc<Inner>,
    threads: Mutex<Vec<JoinHandle<()>>>,
}

impl Engine {
    pub fn open(dir: impl AsRef<Path>, config: Config) -> Result<Engine> {
        Self::open_with_faults(dir, config, Faults::none())
    }

    /// Opens the store, replaying the manifest and every live WAL segment.
    pub fn open_with_faults(dir: impl AsRef<Path>, config: Config, faults: Faults) -> Result<Engine> {
        config.validate()?;
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        let wal_dir = dir.join("wal");
        std::fs::create_dir_all(&wal_dir)?;
        let metrics = Arc::new(Metrics::new(config.metrics_interval));

        let vset = VersionSet::open(&dir, Some(metrics.clone()), faults.clone())?;
        let bv = Arc::new(BValueStore::open(
            &dir.join("bvalue"),
            &config,
            metrics.clone(),
            faults.clone(),
        )?);
        let cache = Arc::new(BVCache::new(
            config.bvcache_capacity,
            config.cache_policy,
            Some(metrics.clone()),
        ));
        let listener_cache = cache.clone();
        bv.set_persist_listener(Box::new(move |persisted| {
            for (key, voff) in persisted {
                listener_cache.on_persisted_at(key, *voff);
            }
        }));

        let retired = vset.wal_retired().unwrap_or(0);
        let segments = wal::list_segments(&wal_dir)?;
        let replayed = MemTable::new();
        let mut last_seq = vset.last_seq();
        let mut newest_segment = retired;
        for &seg in &segments {
            newest_segment = newest_segment.max(seg);
            if seg <= retired {
                wal::remove_segment(&wal_dir, seg)?;
                continue;
            }
            wal::replay(&wal::segment_path(&wal_dir, seg), |e| {
                if let Payload::Pointer(voff) = e.payload {
                    bv.verify(voff).map_err(|err| {
                        Error::CorruptStore(format!(
                            "WAL segment {seg} seq {} points at an unreadable value: {err}",
                            e.seq
                        ))
                    })?;
                }
                last_seq = last_seq.max(e.seq);
                replayed.insert(e)
            })?;
        }

        let barrier_bv = bv.clone();
        let wal = Wal::create(
            &wal_dir,
            newest_segment + 1,
            config.async_buffer_limit,
            Box::new(move || barrier_bv.sync_all()),
            metrics.clone(),
            faults.clone(),
        )?;

        let inner = Arc::new(Inner {
            dir,
            metrics,
            faults,
            bv,
            cache,
            vset,
            wal,
            commit: Mutex::new(Commit {
                last_seq,
                next_wal_segment: newest_segment + 2,
            }),
            mem: RwLock::new(MemState {
                mutable: Arc::new(MemTable::new()),
                immutable: VecDeque::new(),
            }),
            bg: Mutex::new(BgState::default()),
            bg_cv: Condvar::new(),
            failed: AtomicBool::new(false),
            closed: AtomicBool::new(false),
            compaction_lock: Mutex::new(()),
            visible_seq: AtomicU64::new(last_seq),
            config,
        });

        if newest_segment > retired {
            // Persist what the log held, then retire those segments.
            replayed.seal();
            inner.flush_memtable(&replayed, newest_segment)?;
        }

        let threads = background::spawn(&inner);
        Ok(Engine {
            inner,
            threads: Mutex::new(threads),
        })
    }

    pub fn put(&self, key: &[u8], value: &[u8], opts: WriteOptions) -> Result<()> {
        self.inner.put(Key::new(key)?, value, opts)
    }

    pub fn delete(&self, key: &[u8], opts: WriteOptions) -> Result<()> {
        self.inner.delete(Key::new(key)?, opts)
    }

    pub fn get(&self, key: &[u8]) -> Result<Option<Vec<u8>>> {
        self.inner.get(&Key::new(key)?)
    }

    /// Seals the mutable memtable and waits until every sealed table is on disk.
    pub fn flush(&self) -> Result<()> {
        self.inner.flush_all()
    }

    /// Runs compactions in the foreground until none is due and L0 is empty.
    pub fn compact(&self) -> Result<()> {
        self.inner.check_usable()?;
        while self.inner.compact_step(true)? {}
        Ok(())
    }

    /// Flushes, then runs every compaction that is due. Afterwards the tree
    /// is in the shape background work would eventually reach.
    pub fn settle(&self) -> Result<()> {
        self.inner.flush_all()?;
        while self.inner.compact_step(false)? {}
        Ok(())
    }

    /// Writes every buffered value and log record out and syncs them.
    pub fn sync(&self) -> Result<()> {
        self.inner.check_usable()?;
        self.inner.bv.sync_all()?;
        self.inner.wal.drain()
    }

    pub fn stats(&self) -> MetricsSnapshot {
        self.inner.metrics.snapshot()
    }

    pub fn metrics(&self) -> &Arc<Metrics> {
        &self.inner.metrics
    }

    pub fn config(&self) -> &Config {
        &self.inner.config
    }

    pub fn dir(&self) -> &Path {
        &self.inner.dir
    }

    pub fn version(&self) -> Arc<Version> {
        self.inner.vset.current()
    }

    pub fn value_store(&self) -> &BValueStore {
        &self.inner.bv
    }

    pub fn cache(&self) -> &BVCache {
        &self.inner.cache
    }

    pub fn last_sequence(&self) -> SequenceNumber {
        self.inner.visible_seq.load(Ordering::Acquire)
    }

    pub fn mutable_len(&self) -> usize {
        self.inner.mem.read().mutable.len()
    }

    pub fn mutable_size(&self) -> usize {
        self.inner.mem.read().mutable.size()
    }

    pub fn immutable_count(&self) -> usize {
        self.inner.mem.read().immutable.len()
    }

    /// Stops background work and drains buffered writes. Memtables are not
    /// flushed; the WAL covers them.
    pub fn close(&self) -> Result<()> {
        if self.inner.closed.swap(true, Ordering::AcqRel) {
            return Ok(());
        }
        {
            let mut bg = self.inner.bg.lock();
            bg.shutdown = true;
        }
        self.inner.bg_cv.notify_all();
        for t in self.threads.lock().drain(..) {
            let _ = t.join();
        }
        let a = self.inner.bv.sync_all();
        let b = self.inner.wal.close();
        let c = self.inner.bv.close();
        a.and(b).and(c)
    }
}

impl Drop for Engine {
    fn drop(&mut self) {
        let _ = self.close();
    }
}

impl Inner {
    fn check_usable(&self) -> Result<()> {
        if self.closed.load(Ordering::Acquire) {
            return Err(Error::EngineClosed);
        }
        if self.failed.load(Ordering::Acquire) {
            let msg = self.bg.lock().error.clone().unwrap_or_default();
            return Err(Error::Background(msg));
        }
        if self.faults.crashed() {
            return Err(Error::Crashed("engine"));
        }
        Ok(())
    }

    pub(crate) fn fail(&self, e: Error) {
        {
            let mut bg = self.bg.lock();
            if bg.error.is_none() {
                bg.error = Some(e.to_string());
            }
        }
        self.failed.store(true, Ordering::Release);
        self.bg_cv.notify_all();
    }

    fn put(&self, key: Key, value: &[u8], opts: WriteOptions) -> Result<()> {
        self.check_usable()?;
        if value.len() > self.config.max_value_size {
            return Err(Error::ValueTooLarge {
                len: value.len(),
                max: self.config.max_value_size,
            });
        }
        let mode = opts.wal_mode.unwrap_or(self.config.wal_mode);
        let user_bytes = (key.len() + value.len()) as u64;
        if !self.config.separates(value.len()) {
            self.commit(key, Kind::Put, Payload::Inline(value.to_vec()), mode, None)?;
        } else {
            let appended = self.bv.append(&key, value, mode == WalMode::Sync)?;
            let pending = appended.completion.map(|c| (c, Arc::<[u8]>::from(value)));
            self.commit(key, Kind::Put, Payload::Pointer(appended.voff), mode, pending)?;
        }
        self.metrics.add(Counter::UserBytesIn, user_bytes);
        self.metrics.add(Counter::Puts, 1);
        self.metrics.record_op(user_bytes);
        Ok(())
    }

    fn delete(&self, key: Key, opts: WriteOptions) -> Result<()> {
        self.check_usable()?;
        let mode = opts.wal_mode.unwrap_or(self.config.wal_mode);
        let user_bytes = key.len() as u64;
        self.commit(key, Kind::Delete, Payload::None, mode, None)?;
        self.metrics.add(Counter::UserBytesIn, user_bytes);
        self.metrics.add(Counter::Deletes, 1);
        self.metrics.record_op(user_bytes);
        Ok(())
    }

    /// Assigns a sequence number, logs and applies one entry.
    fn commit(
        &self,
        key: Key,
        kind: Kind,
        payload: Payload,
        mode: WalMode,
        pending: Option<(crate::bvstore::Completion, Arc<[u8]>)>,
    ) -> Result<()> {
        let mut c = self.commit.lock();
        self.check_usable()?;
        let seq = c.last_seq + 1;
        let entry = InternalEntry {
            key,
            seq,
            kind,
            payload,
        };
        self.wal.append(&entry, mode)?;
        c.last_seq = seq;
        let voff = match entry.payload {
            Payload::Pointer(v) => Some(v),
            _ => None,
        };
        let key = entry.key.clone();
        let mutable = self.mem.read().mutable.clone();
        mutable.insert(entry)?;
        self.visible_seq.store(seq, Ordering::Release);

        if let Some(voff) = voff {
            self.cache_value(&key, voff, pending)?;
        }
        if mutable.size() >= self.config.memtable_size {
            self.seal_locked(&mut c)?;
        }
        Ok(())
    }

    fn cache_value(
        &self,
        key: &Key,
        voff: crate::types::ValueOffset,
        pending: Option<(crate::bvstore::Completion, Arc<[u8]>)>,
    ) -> Result<()> {
        let (resident, completion) = match pending {
            Some((c, bytes)) if !c.is_done() => (Some(bytes), Some(c)),
            _ => (None, None),
        };
        let mut attempt = self.cache.insert(key.clone(), voff, resident.clone());
        if matches!(attempt, Err(Error::AllPinned)) {
            // Make pending values durable so their entries become evictable.
            self.bv.sync_all()?;
            attempt = self.cache.insert(key.clone(), voff, resident);
        }
        match attempt {
            Ok(()) => {}
            Err(Error::EntryTooLarge { .. } | Error::AllPinned) => {}
            Err(e) => return Err(e),
        }
        // The value may have been drained before its entry existed.
        if completion.is_some_and(|c| c.is_done()) {
            self.cache.on_persisted_at(key, voff);
        }
        Ok(())
    }

    /// Moves the mutable memtable onto the flush queue, stalling while the
    /// queue is full.
    fn seal_locked(&self, c: &mut Commit) -> Result<()> {
        let limit = self.config.max_immutable_memtables;
        if self.mem.read().immutable.len() >= limit {
            let start = Instant::now();
            let mut bg = self.bg.lock();
            while self.mem.read().immutable.len() >= limit {
                if bg.shutdown || bg.error.is_some() {
                    break;
                }
                self.bg_cv.wait_for(&mut bg, Duration::from_millis(20));
            }
            drop(bg);
            self.metrics
                .add(Counter::StallMicros, start.elapsed().as_micros() as u64);
            self.check_usable()?;
        }
        let segment = c.next_wal_segment;
        let old = self.wal.rotate(segment)?;
        c.next_wal_segment += 1;
        {
            let mut mem = self.mem.write();
            let table = std::mem::replace(&mut mem.mutable, Arc::new(MemTable::new()));
            table.seal();
            mem.immutable.push_front(Sealed {
                table,
                wal_segment: old,
            });
        }
        self.bg_cv.notify_all();
        Ok(())
    }

    fn get(&self, key: &Key) -> Result<Option<Vec<u8>>> {
        if self.closed.load(Ordering::Acquire) {
            return Err(Error::EngineClosed);
        }
        self.metrics.add(Counter::Gets, 1);
        // Memtables before the version: a flush installs its table before
        // it drops the memtable, so this order never misses an entry.
        let (mutable, sealed): (Arc<MemTable>, Vec<Arc<MemTable>>) = {
            let mem = self.mem.read();
            (
                mem.mutable.clone(),
                mem.immutable.iter().map(|s| s.table.clone()).collect(),
            )
        };
        let version = self.vset.current();
        let at = SequenceNumber::MAX;
        let found = match mutable.get(key, at) {
            Some(hit) => Some(hit),
            None => match sealed.iter().find_map(|t| t.get(key, at)) {
                Some(hit) => Some(hit),
                None => version.get(key.as_bytes(), at)?,
            },
        };
        match found {
            None | Some((_, Kind::Delete, _)) => Ok(None),
            Some((_, Kind::Put, Payload::Inline(v))) => Ok(Some(v)),
            Some((_, Kind::Put, Payload::Pointer(voff))) => {
                if let Some((cached, resident)) = self.cache.get(key) {
                    if cached == voff {
                        if let Some(bytes) = resident {
                            return Ok(Some(bytes.to_vec()));
                        }
                    }
                }
                self.bv.read(voff).map(Some)
            }
            Some((_, Kind::Put, Payload::None)) => Err(Error::MalformedEntry("put without payload")),
        }
    }

    fn flush_all(&self) -> Result<()> {
        self.check_usable()?;
        {
            let mut c = self.commit.lock();
            if !self.mem.read().mutable.is_empty() {
                self.seal_locked(&mut c)?;
            }
        }
        let mut bg = self.bg.lock();
        while !self.mem.read().immutable.is_empty() {
            if let Some(e) = &bg.error {
                return Err(Error::Background(e.clone()));
            }
            if bg.shutdown {
                return Err(Error::EngineClosed);
            }
            self.bg_cv.wait_for(&mut bg, Duration::from_millis(10));
        }
        Ok(())
    }

    /// Writes the oldest sealed memtable to L0.
    pub(crate) fn flush_oldest(&self) -> Result<bool> {
        let Some((table, segment)) = self
            .mem
            .read()
            .immutable
            .back()
            .map(|s| (s.table.clone(), s.wal_segment))
        else {
            return Ok(false);
        };
        self.flush_memtable(&table, segment)?;
        self.mem.write().immutable.pop_back();
        {
            let mut bg = self.bg.lock();
            bg.compact_pending = true;
        }
        self.bg_cv.notify_all();
        Ok(true)
    }

    /// Persists `table` as one L0 table and retires WAL segments up to
    /// `wal_segment`.
    fn flush_memtable(&self, table: &MemTable, wal_segment: u64) -> Result<()> {
        // Pointers in the table must never outlive their values.
        self.bv.sync_all()?;
        let last_seq = table.max_seq().unwrap_or(0).max(self.vset.last_seq());
        let (entries, dead) = dedupe_newest(table.iter());
        let mut edit = VersionEdit {
            last_seq: Some(last_seq),
            wal_retired: Some(wal_segment),
            ..Default::default()
        };
        if !entries.is_empty() {
            let mut builder = TableBuilder::new(BuildOptions {
                block_size: self.config.block_size,
                bloom_bits_per_key: self.config.bloom_bits_per_key,
            });
            for e in &entries {
                builder.add(e)?;
            }
            let n = self.vset.new_file_number();
            let meta = builder.finish(&table_path(self.vset.sst_dir(), n), n, &self.faults)?;
            self.metrics.add(Counter::FlushBytes, meta.size);
            edit.added.push(meta);
        }
        self.vset.commit(edit)?;
        self.metrics.add(Counter::BvalueDeadBytes, dead);
        self.metrics.add(Counter::Flushes, 1);
        let wal_dir = self.dir.join("wal");
        for seg in wal::list_segments(&wal_dir)? {
            if seg <= wal_segment {
                wal::remove_segment(&wal_dir, seg)?;
            }
        }
        Ok(())
    }

    /// Runs one compaction job if one is due. Returns whether it did.
    pub(crate) fn compact_step(&self, forced: bool) -> Result<bool> {
        let _guard = self.compaction_lock.lock();
        let version = self.vset.current();
        let job = {
            let mut cursors = self.vset.cursors();
            if forced {
                compaction::pick_forced(&version, &self.config, &mut cursors)
            } else {
                compaction::pick(&version, &self.config, &mut cursors)
            }
        };
        let Some(job) = job else {
            return Ok(false);
        };
        let (edit, stats) = compaction::run(&job, &version, &self.vset, &self.config, &self.faults)?;
        self.vset.commit(edit)?;
        stats.record(&self.metrics);
        self.bg_cv.notify_all();
        Ok(true)
    }
}
