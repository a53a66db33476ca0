//! Level metadata and its persistence.
//!
//! `MANIFEST` is an append-only log of [`VersionEdit`]s wrapped in the same
//! checksummed envelope as the WAL; `CURRENT` names it. Opening replays
//! every edit from the start and cuts a torn tail.

pub mod compaction;
mod edit;

use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};

pub use edit::VersionEdit;

use crate::codec::{encode_record, scan_records};
use crate::error::{Error, Result};
use crate::fault::Faults;
use crate::metrics::Metrics;
use crate::sstable::{table_path, Table, TableMeta};
use crate::types::{Kind, Payload, SequenceNumber};

pub const NUM_LEVELS: usize = 7;
pub const MANIFEST_FILE: &str = "MANIFEST";
pub const CURRENT_FILE: &str = "CURRENT";

/// An immutable snapshot of which tables live on which level.
#[derive(Debug, Clone)]
pub struct Version {
    levels: Vec<Vec<Arc<Table>>>,
}

impl Default for Version {
    fn default() -> Self {
        Version {
            levels: vec![Vec::new(); NUM_LEVELS],
        }
    }
}

impl Version {
    pub fn level(&self, level: usize) -> &[Arc<Table>] {
        &self.levels[level]
    }

    pub fn level_bytes(&self, level: usize) -> u64 {
        self.levels[level].iter().map(|t| t.meta().size).sum()
    }

    pub fn total_files(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn tables(&self) -> impl Iterator<Item = &Arc<Table>> {
        self.levels.iter().flatten()
    }

    pub fn file_numbers(&self) -> HashSet<u64> {
        self.tables().map(|t| t.meta().file_number).collect()
    }

    /// Tables of `level` whose key range intersects `[lo, hi]`.
    pub fn overlapping(&self, level: usize, lo: &[u8], hi: &[u8]) -> Vec<Arc<Table>> {
        self.levels[level]
            .iter()
            .filter(|t| t.meta().overlaps(lo, hi))
            .cloned()
            .collect()
    }

    /// The single table of a sorted level (L1+) that may hold `key`.
    fn find_in_level(&self, level: usize, key: &[u8]) -> Option<&Arc<Table>> {
        let tables = &self.levels[level];
        let i = tables.partition_point(|t| t.meta().max_key.as_bytes() < key);
        tables.get(i).filter(|t| t.meta().min_key.as_bytes() <= key)
    }

    pub fn overlaps_below(&self, level: usize, key: &[u8]) -> bool {
        (level + 1..NUM_LEVELS).any(|l| self.find_in_level(l, key).is_some())
    }

    /// Searches L0 newest first, then each deeper level.
    pub fn get(&self, key: &[u8], at_seq: SequenceNumber) -> Result<Option<(SequenceNumber, Kind, Payload)>> {
        for t in &self.levels[0] {
            if let Some(hit) = t.get(key, at_seq)? {
                return Ok(Some(hit));
            }
        }
        for level in 1..NUM_LEVELS {
            if let Some(t) = self.find_in_level(level, key) {
                if let Some(hit) = t.get(key, at_seq)? {
                    return Ok(Some(hit));
                }
            }
        }
        Ok(None)
    }

    fn apply(&self, edit: &VersionEdit, opened: &HashMap<u64, Arc<Table>>) -> Version {
        let deleted: HashSet<u64> = edit.deleted.iter().copied().collect();
        let mut levels: Vec<Vec<Arc<Table>>> = self
            .levels
            .iter()
            .map(|l| {
                l.iter()
                    .filter(|t| !deleted.contains(&t.meta().file_number))
                    .cloned()
                    .collect()
            })
            .collect();
        for meta in &edit.added {
            if let Some(t) = opened.get(&meta.file_number) {
                levels[meta.level].push(t.clone());
            }
        }
        levels[0].sort_by_key(|t| std::cmp::Reverse(t.meta().file_number));
        for l in &mut levels[1..] {
            l.sort_by(|a, b| a.meta().min_key.cmp(&b.meta().min_key));
        }
        Version { levels }
    }

    /// Checks L1+ tables are sorted and pairwise disjoint.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        for (level, tables) in self.levels.iter().enumerate().skip(1) {
            for w in tables.windows(2) {
                let (a, b) = (w[0].meta(), w[1].meta());
                if a.max_key >= b.min_key {
                    return Err(format!(
                        "L{level}: table {} [{:?}..{:?}] overlaps table {} [{:?}..{:?}]",
                        a.file_number, a.min_key, a.max_key, b.file_number, b.min_key, b.max_key
                    ));
                }
            }
        }
        Ok(())
    }
}

struct Manifest {
    file: File,
    path: PathBuf,
    len: u64,
    last_seq: SequenceNumber,
    wal_retired: Option<u64>,
}

/// Owns the current [`Version`] and serializes every change through the
/// manifest.
pub struct VersionSet {
    root: PathBuf,
    sst_dir: PathBuf,
    current: RwLock<Arc<Version>>,
    manifest: Mutex<Manifest>,
    next_file: AtomicU64,
    cursors: Mutex<Vec<Option<Vec<u8>>>>,
    metrics: Option<Arc<Metrics>>,
    faults: Faults,
}

fn write_atomically(dir: &Path, name: &str, contents: &[u8]) -> Result<()> {
    let tmp = dir.join(format!("{name}.tmp"));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, dir.join(name))?;
    File::open(dir)?.sync_all()?;
    Ok(())
}

impl VersionSet {
    pub fn open(root: &Path, metrics: Option<Arc<Metrics>>, faults: Faults) -> Result<Self> {
        let sst_dir = root.join("sst");
        fs::create_dir_all(&sst_dir)?;
        let current_path = root.join(CURRENT_FILE);
        let manifest_path = root.join(MANIFEST_FILE);
        match fs::read_to_string(&current_path) {
            Ok(name) if name.trim() == MANIFEST_FILE => {
                if !manifest_path.exists() {
                    return Err(Error::CorruptStore("CURRENT names a missing manifest".into()));
                }
            }
            Ok(name) => {
                return Err(Error::CorruptStore(format!(
                    "CURRENT names unknown manifest {:?}",
                    name.trim()
                )))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                File::create(&manifest_path)?.sync_all()?;
                write_atomically(root, CURRENT_FILE, format!("{MANIFEST_FILE}\n").as_bytes())?;
            }
            Err(e) => return Err(e.into()),
        }

        let bytes = fs::read(&manifest_path)?;
        let mut edits = Vec::new();
        let scan = scan_records(&bytes, |payload| {
            edits.push(
                VersionEdit::decode(payload)
                    .map_err(|e| Error::CorruptStore(format!("manifest edit: {e}")))?,
            );
            Ok(())
        })?;
        let file = OpenOptions::new().append(true).open(&manifest_path)?;
        if scan.truncated {
            file.set_len(scan.valid_len as u64)?;
            file.sync_all()?;
        }
        faults.created(&manifest_path);

        let mut live: HashMap<u64, TableMeta> = HashMap::new();
        let mut last_seq = 0;
        let mut next_file = 1;
        let mut wal_retired = None;
        for edit in &edits {
            for f in &edit.deleted {
                live.remove(f);
            }
            for m in &edit.added {
                live.insert(m.file_number, m.clone());
            }
            last_seq = last_seq.max(edit.last_seq.unwrap_or(0));
            next_file = next_file.max(edit.next_file.unwrap_or(0));
            wal_retired = wal_retired.max(edit.wal_retired);
        }
        let mut opened = HashMap::new();
        for (n, meta) in &live {
            let table = Table::open(&table_path(&sst_dir, *n), *n, meta.level, metrics.clone())
                .map_err(|e| Error::CorruptStore(format!("table {n}: {e}")))?;
            opened.insert(*n, Arc::new(table));
            next_file = next_file.max(n + 1);
        }
        let all = VersionEdit {
            added: live.into_values().collect(),
            ..VersionEdit::default()
        };
        let version = Version::default().apply(&all, &opened);

        let vs = VersionSet {
            root: root.to_path_buf(),
            sst_dir,
            current: RwLock::new(Arc::new(version)),
            manifest: Mutex::new(Manifest {
                file,
                path: manifest_path,
                len: scan.valid_len as u64,
                last_seq,
                wal_retired,
            }),
            next_file: AtomicU64::new(next_file),
            cursors: Mutex::new(vec![None; NUM_LEVELS]),
            metrics,
            faults,
        };
        vs.remove_orphans()?;
        Ok(vs)
    }

    /// Deletes table files the manifest does not reference.
    fn remove_orphans(&self) -> Result<()> {
        let live = self.current().file_numbers();
        for entry in fs::read_dir(&self.sst_dir)? {
            let path = entry?.path();
            let number = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_suffix(".sst"))
                .and_then(|n| n.parse::<u64>().ok());
            if let Some(n) = number {
                if !live.contains(&n) {
                    fs::remove_file(&path)?;
                }
            }
        }
        Ok(())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn sst_dir(&self) -> &Path {
        &self.sst_dir
    }

    pub fn current(&self) -> Arc<Version> {
        self.current.read().clone()
    }

    pub fn new_file_number(&self) -> u64 {
        self.next_file.fetch_add(1, Ordering::SeqCst)
    }

    pub fn last_seq(&self) -> SequenceNumber {
        self.manifest.lock().last_seq
    }

    pub fn wal_retired(&self) -> Option<u64> {
        self.manifest.lock().wal_retired
    }

    pub fn manifest_len(&self) -> u64 {
        self.manifest.lock().len
    }

    pub(crate) fn cursors(&self) -> parking_lot::MutexGuard<'_, Vec<Option<Vec<u8>>>> {
        self.cursors.lock()
    }

    /// Appends `edit` to the manifest, syncs it, then installs the new
    /// version. Tables the edit deletes are unlinked afterwards.
    pub fn commit(&self, mut edit: VersionEdit) -> Result<()> {
        let mut opened = HashMap::new();
        for meta in &edit.added {
            let t = Table::open(
                &table_path(&self.sst_dir, meta.file_number),
                meta.file_number,
                meta.level,
                self.metrics.clone(),
            )?;
            opened.insert(meta.file_number, Arc::new(t));
        }
        let mut m = self.manifest.lock();
        edit.next_file = Some(self.next_file.load(Ordering::SeqCst));
        let record = encode_record(&edit.encode());
        self.faults.write(&mut m.file, &record, "manifest.write")?;
        m.len += record.len() as u64;
        let (len, path) = (m.len, m.path.clone());
        self.faults.sync(&m.file, &path, len, "manifest.sync")?;
        self.faults.hit("manifest.apply")?;

        if let Some(s) = edit.last_seq {
            m.last_seq = m.last_seq.max(s);
        }
        m.wal_retired = m.wal_retired.max(edit.wal_retired);
        let next = self.current().apply(&edit, &opened);
        *self.current.write() = Arc::new(next);
        drop(m);
        for f in &edit.deleted {
            let _ = fs::remove_file(table_path(&self.sst_dir, *f));
        }
        Ok(())
    }
}
