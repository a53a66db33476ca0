//! In-memory ordered write buffer.

use std::cmp::Reverse;
use std::collections::BTreeMap;
use std::ops::Bound;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use parking_lot::RwLock;

use crate::error::{Error, Result};
use crate::types::{InternalEntry, Key, Kind, Payload, SequenceNumber};

/// Fixed bookkeeping charge added per entry.
pub const ENTRY_OVERHEAD: usize = 32;

pub fn entry_charge(e: &InternalEntry) -> usize {
    e.key.len() + e.payload.charge() + ENTRY_OVERHEAD
}

type Map = BTreeMap<(Key, Reverse<SequenceNumber>), (Kind, Payload)>;

#[derive(Debug, Default)]
pub struct MemTable {
    map: RwLock<Map>,
    size: AtomicUsize,
    sealed: AtomicBool,
}

impl MemTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&self, e: InternalEntry) -> Result<()> {
        let mut map = self.map.write();
        if self.sealed.load(Ordering::Acquire) {
            return Err(Error::ImmutableViolation);
        }
        self.size.fetch_add(entry_charge(&e), Ordering::Relaxed);
        map.insert((e.key, Reverse(e.seq)), (e.kind, e.payload));
        Ok(())
    }

    /// Newest entry for `key` with seq ≤ `at_seq`. Tombstones are returned.
    pub fn get(&self, key: &Key, at_seq: SequenceNumber) -> Option<(SequenceNumber, Kind, Payload)> {
        let map = self.map.read();
        let ((k, Reverse(seq)), (kind, payload)) = map
            .range((Bound::Included((key.clone(), Reverse(at_seq))), Bound::Unbounded))
            .next()?;
        (k == key).then(|| (*seq, *kind, payload.clone()))
    }

    pub fn size(&self) -> usize {
        self.size.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.map.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.read().is_empty()
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed.load(Ordering::Acquire)
    }

    /// Makes the table read-only. Sealing twice is harmless.
    pub fn seal(&self) {
        let _map = self.map.write();
        self.sealed.store(true, Ordering::Release);
    }

    pub fn max_seq(&self) -> Option<SequenceNumber> {
        self.map.read().keys().map(|(_, Reverse(s))| *s).max()
    }

    /// Snapshot of all entries in (key asc, seq desc) order.
    pub fn entries(&self) -> Vec<InternalEntry> {
        self.map
            .read()
            .iter()
            .map(|((key, Reverse(seq)), (kind, payload))| InternalEntry {
                key: key.clone(),
                seq: *seq,
                kind: *kind,
                payload: payload.clone(),
            })
            .collect()
    }

    pub fn iter(&self) -> std::vec::IntoIter<InternalEntry> {
        self.entries().into_iter()
    }
}
