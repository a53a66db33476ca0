use std::collections::VecDeque;
use std::fs::File;
use std::ops::Bound;
use std::os::unix::fs::FileExt;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::{Bloom, TableMeta, FOOTER_TAIL, MAGIC};
use crate::codec::{checksum, decode_entry_prefix, decode_uvarint};
use crate::error::{Error, Result};
use crate::metrics::{Counter, Metrics};
use crate::types::{InternalEntry, Key, Kind, Payload, SequenceNumber};

#[derive(Debug)]
struct IndexEntry {
    last_key: Vec<u8>,
    offset: u64,
    len: u32,
}

/// An open table: footer, index and bloom filter held in memory, data blocks
/// read on demand.
#[derive(Debug)]
pub struct Table {
    file: File,
    meta: TableMeta,
    index: Vec<IndexEntry>,
    bloom: Bloom,
    blocks_read: AtomicU64,
    metrics: Option<Arc<Metrics>>,
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.buf.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }

    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }

    fn varint(&mut self) -> Option<u64> {
        let (v, n) = decode_uvarint(&self.buf[self.pos..]).ok()?;
        self.pos += n;
        Some(v)
    }

    fn bytes(&mut self) -> Option<&'a [u8]> {
        let n = self.varint()?;
        self.take(usize::try_from(n).ok()?)
    }
}

impl Table {
    pub fn open(path: &Path, file_number: u64, level: usize, metrics: Option<Arc<Metrics>>) -> Result<Self> {
        let corrupt = |reason: &'static str| Error::CorruptTable { file_number, reason };
        let file = File::open(path)?;
        let size = file.metadata()?.len();
        if size < FOOTER_TAIL as u64 {
            return Err(corrupt("file too short"));
        }
        let mut tail = [0u8; FOOTER_TAIL];
        file.read_exact_at(&mut tail, size - FOOTER_TAIL as u64)?;
        if tail[4..8] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let footer_len = u32::from_le_bytes(tail[..4].try_into().expect("4 bytes")) as u64;
        if footer_len < FOOTER_TAIL as u64 || footer_len > size {
            return Err(corrupt("bad footer length"));
        }
        let mut footer = vec![0u8; footer_len as usize];
        file.read_exact_at(&mut footer, size - footer_len)?;
        let crc = u32::from_le_bytes(footer[footer.len() - 4..].try_into().expect("4 bytes"));
        if checksum(&footer[..footer.len() - 4]) != crc {
            return Err(corrupt("footer checksum mismatch"));
        }
        let mut c = Cursor { buf: &footer, pos: 0 };
        let parsed = (|| {
            let index = (c.u64()?, c.u32()?);
            let bloom = (c.u64()?, c.u32()?);
            let count = c.u64()?;
            let min = c.bytes()?;
            let max = c.bytes()?;
            Some((index, bloom, count, min, max))
        })();
        let ((index_off, index_len), (bloom_off, bloom_len), entries, min, max) =
            parsed.ok_or(corrupt("truncated footer"))?;
        let data_end = size - footer_len;
        if index_off + index_len as u64 > data_end || bloom_off + bloom_len as u64 > data_end {
            return Err(corrupt("section out of bounds"));
        }

        let mut raw = vec![0u8; index_len as usize];
        file.read_exact_at(&mut raw, index_off)?;
        let mut index = Vec::new();
        let mut c = Cursor { buf: &raw, pos: 0 };
        while c.pos < raw.len() {
            let e = (|| {
                Some(IndexEntry {
                    last_key: c.bytes()?.to_vec(),
                    offset: c.u64()?,
                    len: c.u32()?,
                })
            })()
            .ok_or(corrupt("bad index entry"))?;
            if e.offset + e.len as u64 > index_off {
                return Err(corrupt("block out of bounds"));
            }
            index.push(e);
        }
        if index.windows(2).any(|w| w[0].last_key > w[1].last_key) {
            return Err(corrupt("index out of order"));
        }

        let mut raw = vec![0u8; bloom_len as usize];
        file.read_exact_at(&mut raw, bloom_off)?;
        let bloom = Bloom::decode(&raw).ok_or(corrupt("bad bloom block"))?;

        let key = |b: &[u8]| Key::new(b).map_err(|_| corrupt("bad footer key"));
        let meta = TableMeta {
            file_number,
            level,
            size,
            min_key: key(min)?,
            max_key: key(max)?,
            entries,
        };
        Ok(Table {
            file,
            meta,
            index,
            bloom,
            blocks_read: AtomicU64::new(0),
            metrics,
        })
    }

    pub fn meta(&self) -> &TableMeta {
        &self.meta
    }

    pub fn blocks_read(&self) -> u64 {
        self.blocks_read.load(Ordering::Relaxed)
    }

    pub fn may_contain(&self, key: &[u8]) -> bool {
        self.bloom.may_contain(key)
    }

    fn corrupt(&self, reason: &'static str) -> Error {
        Error::CorruptTable {
            file_number: self.meta.file_number,
            reason,
        }
    }

    fn read_block(&self, i: usize) -> Result<Vec<InternalEntry>> {
        let ie = &self.index[i];
        let mut buf = vec![0u8; ie.len as usize];
        self.file.read_exact_at(&mut buf, ie.offset)?;
        self.blocks_read.fetch_add(1, Ordering::Relaxed);
        if let Some(m) = &self.metrics {
            m.add(Counter::SstBlocksRead, 1);
        }
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < buf.len() {
            let (e, n) = decode_entry_prefix(&buf[pos..]).map_err(|_| self.corrupt("bad entry"))?;
            pos += n;
            out.push(e);
        }
        if out.last().map(|e| e.key.as_bytes()) != Some(&ie.last_key[..]) {
            return Err(self.corrupt("block does not end at its index key"));
        }
        Ok(out)
    }

    fn first_block_for(&self, key: &[u8]) -> usize {
        self.index.partition_point(|ie| ie.last_key.as_slice() < key)
    }

    /// Newest entry for `key` with seq ≤ `at_seq`, tombstones included.
    pub fn get(&self, key: &[u8], at_seq: SequenceNumber) -> Result<Option<(SequenceNumber, Kind, Payload)>> {
        if !self.meta.contains(key) || !self.bloom.may_contain(key) {
            return Ok(None);
        }
        for b in self.first_block_for(key)..self.index.len() {
            for e in self.read_block(b)? {
                match e.key.as_bytes().cmp(key) {
                    std::cmp::Ordering::Less => {}
                    std::cmp::Ordering::Greater => return Ok(None),
                    std::cmp::Ordering::Equal if e.seq <= at_seq => {
                        return Ok(Some((e.seq, e.kind, e.payload)))
                    }
                    std::cmp::Ordering::Equal => {}
                }
            }
            // Versions of one key may continue into the next block.
            if self.index[b].last_key.as_slice() != key {
                break;
            }
        }
        Ok(None)
    }

    /// Entries with keys in `range`, in (key asc, seq desc) order.
    pub fn iter(self: &Arc<Self>, range: (Bound<Key>, Bound<Key>)) -> TableIter {
        let start = match &range.0 {
            Bound::Included(k) | Bound::Excluded(k) => self.first_block_for(k.as_bytes()),
            Bound::Unbounded => 0,
        };
        TableIter {
            table: self.clone(),
            next_block: start,
            buf: VecDeque::new(),
            range,
            done: false,
        }
    }

    pub fn iter_all(self: &Arc<Self>) -> TableIter {
        self.iter((Bound::Unbounded, Bound::Unbounded))
    }
}

pub struct TableIter {
    table: Arc<Table>,
    next_block: usize,
    buf: VecDeque<InternalEntry>,
    range: (Bound<Key>, Bound<Key>),
    done: bool,
}

impl Iterator for TableIter {
    type Item = Result<InternalEntry>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            if let Some(e) = self.buf.pop_front() {
                let below = match &self.range.0 {
                    Bound::Included(lo) => e.key < *lo,
                    Bound::Excluded(lo) => e.key <= *lo,
                    Bound::Unbounded => false,
                };
                if below {
                    continue;
                }
                let above = match &self.range.1 {
                    Bound::Included(hi) => e.key > *hi,
                    Bound::Excluded(hi) => e.key >= *hi,
                    Bound::Unbounded => false,
                };
                if above {
                    self.done = true;
                    return None;
                }
                return Some(Ok(e));
            }
            if self.next_block >= self.table.index.len() {
                self.done = true;
                return None;
            }
            match self.table.read_block(self.next_block) {
                Ok(entries) => {
                    self.next_block += 1;
                    self.buf.extend(entries);
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            }
        }
        None
    }
}
