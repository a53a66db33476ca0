//! The big-value store: several append-only value-log files, each owned by
//! one lane, with round-robin (or hash) dispatch across lanes.
//!
//! Record layout, back to back with no padding:
//!
//! ```text
//! magic "BVL1" | crc u32 (over everything after it) | key_len varint | key
//!   | value_len varint | value
//! ```
//!
//! A durable append writes and syncs its record before returning. A
//! non-durable append only reserves its offset and queues the value in the
//! lane's pending buffer; [`BValueStore::sync_all`] writes every queue out,
//! syncs it, resolves the completion handles and notifies the persist
//! listener.

use std::cell::Cell;
use std::collections::{HashMap, VecDeque};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufReader, Read, Write};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

use parking_lot::{Condvar, Mutex, RwLock};

use crate::codec::{self, checksum, decode_uvarint, encode_uvarint, uvarint_len};
use crate::config::{Config, Dispatch};
use crate::error::{Error, Result};
use crate::fault::Faults;
use crate::metrics::{Counter, Metrics};
use crate::types::{Key, ValueOffset, MAX_KEY_LEN};

pub const MAGIC: [u8; 4] = *b"BVL1";
const HEADER_LEN: usize = 8;
pub const LANES_FILE: &str = "CURRENT_LANES";

pub fn file_path(dir: &Path, file_id: u32) -> PathBuf {
    dir.join(format!("{file_id:010}.bvl"))
}

/// Full on-disk size of the record holding a value of `value_len` bytes.
pub fn record_len(key_len: usize, value_len: usize) -> u64 {
    (HEADER_LEN
        + uvarint_len(key_len as u64)
        + key_len
        + uvarint_len(value_len as u64)
        + value_len) as u64
}

pub fn encode_record_into(key: &[u8], value: &[u8], out: &mut Vec<u8>) {
    let start = out.len();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&[0; 4]);
    encode_uvarint(key.len() as u64, out);
    out.extend_from_slice(key);
    encode_uvarint(value.len() as u64, out);
    out.extend_from_slice(value);
    let crc = checksum(&out[start + HEADER_LEN..]);
    out[start + 4..start + 8].copy_from_slice(&crc.to_le_bytes());
}

thread_local! {
    static IN_COMPACTION: Cell<bool> = const { Cell::new(false) };
}

/// Marks the current thread as running a compaction for the lifetime of the
/// guard, so any value-log read it performs is counted separately.
pub struct CompactionScope(bool);

impl CompactionScope {
    pub fn enter() -> Self {
        CompactionScope(IN_COMPACTION.with(|c| c.replace(true)))
    }
}

impl Drop for CompactionScope {
    fn drop(&mut self) {
        IN_COMPACTION.with(|c| c.set(self.0));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CompletionState {
    Pending,
    Done,
    Failed,
}

/// Resolves once a non-durable append has been written and synced.
#[derive(Debug, Clone)]
pub struct Completion(Arc<(Mutex<CompletionState>, Condvar)>);

impl Completion {
    fn new() -> Self {
        Completion(Arc::new((Mutex::new(CompletionState::Pending), Condvar::new())))
    }

    fn resolve(&self, state: CompletionState) {
        *self.0 .0.lock() = state;
        self.0 .1.notify_all();
    }

    pub fn is_done(&self) -> bool {
        *self.0 .0.lock() == CompletionState::Done
    }

    pub fn wait(&self) -> Result<()> {
        let mut state = self.0 .0.lock();
        while *state == CompletionState::Pending {
            self.0 .1.wait(&mut state);
        }
        match *state {
            CompletionState::Done => Ok(()),
            _ => Err(Error::StoreClosed),
        }
    }
}

/// Called with the (key, offset) of every pending record once it is durable.
pub type PersistListener = Box<dyn Fn(&[(Key, ValueOffset)]) + Send + Sync>;

#[derive(Debug, Clone)]
pub struct Appended {
    pub voff: ValueOffset,
    /// Present for non-durable appends.
    pub completion: Option<Completion>,
}

struct Pending {
    key: Key,
    value: Arc<[u8]>,
    voff: ValueOffset,
    completion: Completion,
}

struct Lane {
    id: usize,
    file_id: u32,
    path: PathBuf,
    file: File,
    /// Logical end of the lane, including pending records.
    write_pos: u64,
    pending: VecDeque<Pending>,
    failed: bool,
}

/// Lock-free view of a lane used by readers to decide whether an offset is
/// already on disk.
struct LaneView {
    file_id: AtomicU32,
    written: AtomicU64,
    records: AtomicU64,
}

pub struct BValueStore {
    dir: PathBuf,
    lanes: Vec<Mutex<Lane>>,
    views: Vec<LaneView>,
    rr: AtomicUsize,
    dispatch: Dispatch,
    next_file_id: Mutex<u32>,
    readers: RwLock<HashMap<u32, Arc<File>>>,
    rotate_size: u64,
    max_value_size: usize,
    listener: RwLock<Option<PersistListener>>,
    closed: AtomicBool,
    disk_bytes: AtomicU64,
    metrics: Arc<Metrics>,
    faults: Faults,
}

impl BValueStore {
    /// Opens (or creates) the store under `dir`, reattaching each lane to
    /// the file recorded in `CURRENT_LANES` and cutting any torn tail.
    pub fn open(dir: &Path, config: &Config, metrics: Arc<Metrics>, faults: Faults) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let mut max_id: Option<u32> = None;
        for entry in fs::read_dir(dir)? {
            let name = entry?.file_name();
            if let Some(id) = name
                .to_str()
                .and_then(|n| n.strip_suffix(".bvl"))
                .and_then(|n| n.parse::<u32>().ok())
            {
                max_id = max_id.max(Some(id));
            }
        }
        let mut next_id = max_id.map_or(0, |m| m + 1);
        let recorded = read_lanes_file(dir)?;

        let mut lanes = Vec::with_capacity(config.bvalue_lanes);
        for lane_id in 0..config.bvalue_lanes {
            let reuse = recorded
                .get(lane_id)
                .copied()
                .filter(|&id| file_path(dir, id).exists());
            let file_id = match reuse {
                Some(id) => id,
                None => {
                    let id = next_id;
                    next_id += 1;
                    id
                }
            };
            let path = file_path(dir, file_id);
            let file = OpenOptions::new().create(true).append(true).open(&path)?;
            let mut len = file.metadata()?.len();
            if reuse.is_some() {
                let valid = valid_prefix_len(&path)?;
                if valid < len {
                    file.set_len(valid)?;
                    file.sync_all()?;
                    len = valid;
                }
            }
            faults.created(&path);
            lanes.push(Lane {
                id: lane_id,
                file_id,
                path,
                file,
                write_pos: len,
                pending: VecDeque::new(),
                failed: false,
            });
        }
        let views = lanes
            .iter()
            .map(|l| LaneView {
                file_id: AtomicU32::new(l.file_id),
                written: AtomicU64::new(l.write_pos),
                records: AtomicU64::new(0),
            })
            .collect();
        let store = BValueStore {
            dir: dir.to_path_buf(),
            lanes: lanes.into_iter().map(Mutex::new).collect(),
            views,
            rr: AtomicUsize::new(0),
            dispatch: config.bvalue_dispatch,
            next_file_id: Mutex::new(next_id),
            readers: RwLock::new(HashMap::new()),
            rotate_size: config.bvalue_file_rotate_size,
            max_value_size: config.max_value_size,
            listener: RwLock::new(None),
            closed: AtomicBool::new(false),
            disk_bytes: AtomicU64::new(0),
            metrics,
            faults,
        };
        {
            let next = store.next_file_id.lock();
            store.write_lanes_file(&next)?;
        }
        Ok(store)
    }

    pub fn set_persist_listener(&self, listener: PersistListener) {
        *self.listener.write() = Some(listener);
    }

    pub fn lane_count(&self) -> usize {
        self.lanes.len()
    }

    /// Records appended per lane since open.
    pub fn lane_record_counts(&self) -> Vec<u64> {
        self.views.iter().map(|v| v.records.load(Ordering::Relaxed)).collect()
    }

    /// Bytes physically written to value-log files since open.
    pub fn disk_bytes_written(&self) -> u64 {
        self.disk_bytes.load(Ordering::Relaxed)
    }

    pub fn pending_bytes(&self) -> u64 {
        self.lanes
            .iter()
            .map(|l| l.lock().pending.iter().map(|p| record_len(p.key.len(), p.value.len())).sum::<u64>())
            .sum()
    }

    fn check_open(&self) -> Result<()> {
        if self.closed.load(Ordering::Acquire) {
            return Err(Error::StoreClosed);
        }
        Ok(())
    }

    fn pick_lane(&self, key: &Key) -> usize {
        match self.dispatch {
            Dispatch::RoundRobin => self.rr.fetch_add(1, Ordering::Relaxed) % self.lanes.len(),
            Dispatch::Hash => {
                (xxhash_rust::xxh3::xxh3_64(key.as_bytes()) % self.lanes.len() as u64) as usize
            }
        }
    }

    /// Appends `value` to a lane and returns where it lives.
    pub fn append(&self, key: &Key, value: &[u8], durable: bool) -> Result<Appended> {
        self.check_open()?;
        if value.len() > self.max_value_size {
            return Err(Error::ValueTooLarge {
                len: value.len(),
                max: self.max_value_size,
            });
        }
        let lane_idx = self.pick_lane(key);
        let mut persisted = Vec::new();
        let appended = {
            let mut lane = self.lanes[lane_idx].lock();
            if lane.failed {
                return Err(Error::StoreClosed);
            }
            if lane.write_pos >= self.rotate_size {
                persisted = self.rotate_locked(&mut lane)?;
            }
            let voff = ValueOffset {
                file_id: lane.file_id,
                offset: lane.write_pos,
                length: value.len() as u32,
            };
            let rec_len = record_len(key.len(), value.len());
            let completion = if durable {
                let mut batch = Vec::new();
                persisted.extend(self.encode_pending(&mut lane, &mut batch));
                encode_record_into(key.as_bytes(), value, &mut batch);
                self.write_batch(&mut lane, &batch, "bvalue.append")?;
                self.finish_pending(&mut lane);
                None
            } else {
                let completion = Completion::new();
                lane.pending.push_back(Pending {
                    key: key.clone(),
                    value: Arc::from(value),
                    voff,
                    completion: completion.clone(),
                });
                Some(completion)
            };
            lane.write_pos += rec_len;
            self.views[lane.id].records.fetch_add(1, Ordering::Relaxed);
            Appended { voff, completion }
        };
        self.metrics.add(Counter::BvalueAppends, 1);
        self.notify(&persisted);
        Ok(appended)
    }

    fn encode_pending(&self, lane: &mut Lane, batch: &mut Vec<u8>) -> Vec<(Key, ValueOffset)> {
        let mut out = Vec::with_capacity(lane.pending.len());
        for p in &lane.pending {
            encode_record_into(p.key.as_bytes(), &p.value, batch);
            out.push((p.key.clone(), p.voff));
        }
        out
    }

    fn finish_pending(&self, lane: &mut Lane) {
        for p in lane.pending.drain(..) {
            p.completion.resolve(CompletionState::Done);
        }
    }

    fn write_batch(&self, lane: &mut Lane, batch: &[u8], point: &'static str) -> Result<()> {
        let view = &self.views[lane.id];
        let written = view.written.load(Ordering::Acquire);
        let res = self.faults.write(&mut lane.file, batch, point).and_then(|_| {
            view.written.store(written + batch.len() as u64, Ordering::Release);
            self.disk_bytes.fetch_add(batch.len() as u64, Ordering::Relaxed);
            self.metrics.add(Counter::BvalueBytes, batch.len() as u64);
            self.faults.sync(
                &lane.file,
                &lane.path,
                written + batch.len() as u64,
                "bvalue.sync",
            )
        });
        if res.is_err() {
            lane.failed = true;
            for p in lane.pending.drain(..) {
                p.completion.resolve(CompletionState::Failed);
            }
        }
        res
    }

    fn drain_lane(&self, lane: &mut Lane) -> Result<Vec<(Key, ValueOffset)>> {
        if lane.pending.is_empty() {
            return Ok(Vec::new());
        }
        if lane.failed {
            return Err(Error::StoreClosed);
        }
        let mut batch = Vec::new();
        let persisted = self.encode_pending(lane, &mut batch);
        self.write_batch(lane, &batch, "bvalue.drain")?;
        self.finish_pending(lane);
        Ok(persisted)
    }

    fn notify(&self, persisted: &[(Key, ValueOffset)]) {
        if persisted.is_empty() {
            return;
        }
        if let Some(listener) = self.listener.read().as_ref() {
            listener(persisted);
        }
    }

    /// Writes and syncs every lane's pending buffer. Lanes drain in parallel.
    pub fn sync_all(&self) -> Result<()> {
        let busy: Vec<usize> = (0..self.lanes.len())
            .filter(|&i| !self.lanes[i].lock().pending.is_empty())
            .collect();
        match busy.len() {
            0 => Ok(()),
            1 => self.sync_lane(busy[0]),
            _ => std::thread::scope(|s| {
                let handles: Vec<_> = busy
                    .iter()
                    .map(|&i| s.spawn(move || self.sync_lane(i)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("lane drain panicked"))
                    .collect::<Result<Vec<()>>>()
                    .map(|_| ())
            }),
        }
    }

    fn sync_lane(&self, idx: usize) -> Result<()> {
        let persisted = {
            let mut lane = self.lanes[idx].lock();
            self.drain_lane(&mut lane)?
        };
        self.notify(&persisted);
        Ok(())
    }

    /// Moves `lane` onto a fresh file; the old file becomes read-only.
    pub fn rotate(&self, lane: usize) -> Result<u32> {
        self.check_open()?;
        let persisted;
        let id = {
            let mut l = self.lanes[lane].lock();
            persisted = self.rotate_locked(&mut l)?;
            l.file_id
        };
        self.notify(&persisted);
        Ok(id)
    }

    fn rotate_locked(&self, lane: &mut Lane) -> Result<Vec<(Key, ValueOffset)>> {
        let persisted = self.drain_lane(lane)?;
        self.faults.hit("bvalue.rotate")?;
        let mut next = self.next_file_id.lock();
        let file_id = *next;
        *next += 1;
        let path = file_path(&self.dir, file_id);
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        self.faults.created(&path);
        lane.file_id = file_id;
        lane.path = path;
        lane.file = file;
        lane.write_pos = 0;
        let view = &self.views[lane.id];
        view.written.store(0, Ordering::Release);
        view.file_id.store(file_id, Ordering::Release);
        self.write_lanes_file(&next)?;
        Ok(persisted)
    }

    fn write_lanes_file(&self, _next_guard: &u32) -> Result<()> {
        let mut text = format!("lanes {}\n", self.lanes.len());
        for (i, v) in self.views.iter().enumerate() {
            text.push_str(&format!("lane {} {}\n", i, v.file_id.load(Ordering::Acquire)));
        }
        let tmp = self.dir.join(format!("{LANES_FILE}.tmp"));
        {
            let mut f = File::create(&tmp)?;
            f.write_all(text.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.dir.join(LANES_FILE))?;
        File::open(&self.dir)?.sync_all()?;
        Ok(())
    }

    fn reader(&self, file_id: u32) -> Result<Arc<File>> {
        if let Some(f) = self.readers.read().get(&file_id) {
            return Ok(f.clone());
        }
        let f = match File::open(file_path(&self.dir, file_id)) {
            Ok(f) => Arc::new(f),
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(Error::CorruptRecord {
                    file_id,
                    offset: 0,
                    reason: "missing value file",
                })
            }
            Err(e) => return Err(e.into()),
        };
        Ok(self.readers.write().entry(file_id).or_insert(f).clone())
    }

    /// Returns the value stored at `voff`, verifying magic and checksum.
    pub fn read(&self, voff: ValueOffset) -> Result<Vec<u8>> {
        self.check_open()?;
        if IN_COMPACTION.with(Cell::get) {
            self.metrics.add(Counter::BvalueReadsInCompaction, 1);
        }
        if let Some(v) = self.read_pending(voff)? {
            return Ok(v.to_vec());
        }
        self.metrics.add(Counter::BvalueReads, 1);
        self.read_from_file(voff)
    }

    /// Checks that a well-formed record sits at `voff` without counting a read.
    pub fn verify(&self, voff: ValueOffset) -> Result<()> {
        if self.read_pending(voff)?.is_some() {
            return Ok(());
        }
        self.read_from_file(voff).map(|_| ())
    }

    fn read_pending(&self, voff: ValueOffset) -> Result<Option<Arc<[u8]>>> {
        for (i, view) in self.views.iter().enumerate() {
            if view.file_id.load(Ordering::Acquire) != voff.file_id
                || voff.offset < view.written.load(Ordering::Acquire)
            {
                continue;
            }
            let lane = self.lanes[i].lock();
            if lane.file_id != voff.file_id {
                break;
            }
            if let Some(p) = lane.pending.iter().find(|p| p.voff.offset == voff.offset) {
                if p.voff.length != voff.length {
                    return Err(Error::CorruptRecord {
                        file_id: voff.file_id,
                        offset: voff.offset,
                        reason: "length mismatch",
                    });
                }
                return Ok(Some(p.value.clone()));
            }
            if voff.offset >= lane.write_pos {
                return Err(Error::NotYetDurable {
                    file_id: voff.file_id,
                    offset: voff.offset,
                });
            }
            if voff.offset >= self.views[i].written.load(Ordering::Acquire) {
                return Err(Error::CorruptRecord {
                    file_id: voff.file_id,
                    offset: voff.offset,
                    reason: "offset is not a record boundary",
                });
            }
            // Drained between the unlocked check and taking the lock.
            break;
        }
        Ok(None)
    }

    fn read_from_file(&self, voff: ValueOffset) -> Result<Vec<u8>> {
        let corrupt = |reason| Error::CorruptRecord {
            file_id: voff.file_id,
            offset: voff.offset,
            reason,
        };
        let file = self.reader(voff.file_id)?;
        let mut head = [0u8; HEADER_LEN + codec::MAX_VARINT_LEN];
        let got = read_at_most(&file, &mut head, voff.offset)?;
        if got < HEADER_LEN + 1 {
            return Err(corrupt("truncated record"));
        }
        if head[..4] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let (key_len, kl) =
            decode_uvarint(&head[HEADER_LEN..got]).map_err(|_| corrupt("bad key length"))?;
        if key_len as usize > MAX_KEY_LEN {
            return Err(corrupt("bad key length"));
        }
        let value_len = voff.length as usize;
        let body_len = kl + key_len as usize + uvarint_len(value_len as u64) + value_len;
        let mut body = vec![0u8; body_len];
        file.read_exact_at(&mut body, voff.offset + HEADER_LEN as u64)
            .map_err(|e| match e.kind() {
                io::ErrorKind::UnexpectedEof => corrupt("truncated record"),
                _ => Error::Io(e),
            })?;
        let crc = u32::from_le_bytes(head[4..8].try_into().expect("4 bytes"));
        if checksum(&body) != crc {
            return Err(corrupt("checksum mismatch"));
        }
        let vpos = kl + key_len as usize;
        let (stored_len, vl) = decode_uvarint(&body[vpos..]).map_err(|_| corrupt("bad value length"))?;
        if stored_len as usize != value_len {
            return Err(corrupt("length mismatch"));
        }
        body.drain(..vpos + vl);
        Ok(body)
    }

    /// Drains everything and refuses further appends.
    pub fn close(&self) -> Result<()> {
        let res = self.sync_all();
        self.closed.store(true, Ordering::Release);
        res
    }
}

fn read_at_most(file: &File, buf: &mut [u8], offset: u64) -> io::Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match file.read_at(&mut buf[got..], offset + got as u64) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(got)
}

fn read_lanes_file(dir: &Path) -> Result<Vec<u32>> {
    let text = match fs::read_to_string(dir.join(LANES_FILE)) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut lanes = Vec::new();
    for line in text.lines() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if let ["lane", idx, id] = parts[..] {
            let (Ok(idx), Ok(id)) = (idx.parse::<usize>(), id.parse::<u32>()) else {
                return Err(Error::CorruptStore(format!("bad {LANES_FILE} line: {line}")));
            };
            if lanes.len() <= idx {
                lanes.resize(idx + 1, u32::MAX);
            }
            lanes[idx] = id;
        }
    }
    Ok(lanes)
}

/// Iterates the well-formed records of one value-log file in offset order,
/// stopping silently at the first torn or corrupt record.
pub struct Scanner {
    reader: BufReader<File>,
    file_id: u32,
    pos: u64,
    remaining: u64,
    done: bool,
}

impl Scanner {
    pub fn open(path: &Path) -> Result<Self> {
        let file_id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse::<u32>().ok())
            .unwrap_or(u32::MAX);
        let file = File::open(path)?;
        let remaining = file.metadata()?.len();
        Ok(Scanner {
            reader: BufReader::with_capacity(256 * 1024, file),
            file_id,
            pos: 0,
            remaining,
            done: false,
        })
    }

    /// Byte length of the valid prefix consumed so far.
    pub fn position(&self) -> u64 {
        self.pos
    }

    fn read_varint(&mut self, body: &mut Vec<u8>) -> io::Result<Option<u64>> {
        let start = body.len();
        for _ in 0..codec::MAX_VARINT_LEN {
            let mut b = [0u8; 1];
            self.reader.read_exact(&mut b)?;
            body.push(b[0]);
            if b[0] & 0x80 == 0 {
                return Ok(decode_uvarint(&body[start..]).ok().map(|(v, _)| v));
            }
        }
        Ok(None)
    }

    fn next_record(&mut self) -> io::Result<Option<(Key, ValueOffset, u64)>> {
        let mut head = [0u8; HEADER_LEN];
        self.reader.read_exact(&mut head)?;
        if head[..4] != MAGIC {
            return Ok(None);
        }
        let crc = u32::from_le_bytes(head[4..8].try_into().expect("4 bytes"));
        let mut body = Vec::new();
        let Some(key_len) = self.read_varint(&mut body)? else {
            return Ok(None);
        };
        if key_len == 0 || key_len as usize > MAX_KEY_LEN {
            return Ok(None);
        }
        let kstart = body.len();
        body.resize(kstart + key_len as usize, 0);
        self.reader.read_exact(&mut body[kstart..])?;
        let Some(value_len) = self.read_varint(&mut body)? else {
            return Ok(None);
        };
        let total = HEADER_LEN as u64 + body.len() as u64 + value_len;
        if value_len > u32::MAX as u64 || self.pos + total > self.remaining {
            return Ok(None);
        }
        let vstart = body.len();
        body.resize(vstart + value_len as usize, 0);
        self.reader.read_exact(&mut body[vstart..])?;
        if checksum(&body) != crc {
            return Ok(None);
        }
        let key = Key::new(&body[kstart..kstart + key_len as usize]).map_err(io::Error::other)?;
        let voff = ValueOffset {
            file_id: self.file_id,
            offset: self.pos,
            length: value_len as u32,
        };
        Ok(Some((key, voff, total)))
    }
}

impl Iterator for Scanner {
    type Item = Result<(Key, ValueOffset)>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done || self.pos >= self.remaining {
            return None;
        }
        match self.next_record() {
            Ok(Some((key, voff, len))) => {
                self.pos += len;
                Some(Ok((key, voff)))
            }
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e.into()))
            }
        }
    }
}

/// Yields every valid (key, offset) of a value-log file.
pub fn scan(path: &Path) -> Result<Scanner> {
    Scanner::open(path)
}

fn valid_prefix_len(path: &Path) -> Result<u64> {
    let mut scanner = Scanner::open(path)?;
    for item in scanner.by_ref() {
        item?;
    }
    Ok(scanner.position())
}
