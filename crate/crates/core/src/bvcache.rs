//! Fixed-capacity cache of big-value pointers, with value bytes held only
//! while the value is not yet durable.
//!
//! Entries sit in a doubly linked deque (head = most recent write) with a
//! key index. Eviction follows the configured policy over unpinned entries;
//! an entry holding resident bytes is pinned until [`BVCache::on_persisted`].

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use parking_lot::Mutex;

use crate::config::CachePolicy;
use crate::error::{Error, Result};
use crate::metrics::{Counter, Metrics};
use crate::types::{Key, ValueOffset};

pub const ENTRY_OVERHEAD: usize = 48;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheEntry {
    pub key: Key,
    pub voff: ValueOffset,
    pub resident: Option<Arc<[u8]>>,
    pub access_count: u64,
    pub last_access: u64,
}

impl CacheEntry {
    pub fn charge(&self) -> usize {
        charge(&self.key, self.resident.as_deref())
    }

    pub fn pinned(&self) -> bool {
        self.resident.is_some()
    }
}

fn charge(key: &Key, resident: Option<&[u8]>) -> usize {
    key.len() + ValueOffset::ENCODED_LEN + resident.map_or(0, <[u8]>::len) + ENTRY_OVERHEAD
}

#[derive(Debug)]
struct Slot {
    entry: CacheEntry,
    prev: Option<usize>,
    next: Option<usize>,
}

type OrderKey = (u64, u64, usize);

#[derive(Debug, Default)]
struct Inner {
    slots: Vec<Option<Slot>>,
    free: Vec<usize>,
    head: Option<usize>,
    tail: Option<usize>,
    index: HashMap<Key, usize>,
    /// Unpinned slots in eviction order.
    order: BTreeSet<OrderKey>,
    charged: usize,
    tick: u64,
}

impl Inner {
    fn slot(&self, i: usize) -> &Slot {
        self.slots[i].as_ref().expect("live slot")
    }

    fn slot_mut(&mut self, i: usize) -> &mut Slot {
        self.slots[i].as_mut().expect("live slot")
    }

    fn order_key(policy: CachePolicy, i: usize, e: &CacheEntry) -> OrderKey {
        match policy {
            CachePolicy::Recency => (e.last_access, 0, i),
            CachePolicy::Frequency => (e.access_count, e.last_access, i),
        }
    }

    fn push_head(&mut self, entry: CacheEntry) -> usize {
        let slot = Slot {
            entry,
            prev: None,
            next: self.head,
        };
        let i = match self.free.pop() {
            Some(i) => {
                self.slots[i] = Some(slot);
                i
            }
            None => {
                self.slots.push(Some(slot));
                self.slots.len() - 1
            }
        };
        if let Some(h) = self.head {
            self.slot_mut(h).prev = Some(i);
        }
        self.head = Some(i);
        if self.tail.is_none() {
            self.tail = Some(i);
        }
        i
    }

    fn unlink(&mut self, i: usize) -> CacheEntry {
        let Slot { entry, prev, next } = self.slots[i].take().expect("live slot");
        match prev {
            Some(p) => self.slot_mut(p).next = next,
            None => self.head = next,
        }
        match next {
            Some(n) => self.slot_mut(n).prev = prev,
            None => self.tail = prev,
        }
        self.free.push(i);
        entry
    }

    fn remove(&mut self, policy: CachePolicy, i: usize) -> CacheEntry {
        let ok = Self::order_key(policy, i, &self.slot(i).entry);
        self.order.remove(&ok);
        let entry = self.unlink(i);
        self.index.remove(&entry.key);
        self.charged -= entry.charge();
        entry
    }

    fn evict_one(&mut self, policy: CachePolicy) -> Option<Key> {
        let &(_, _, i) = self.order.first()?;
        Some(self.remove(policy, i).key)
    }

    fn next_tick(&mut self) -> u64 {
        self.tick += 1;
        self.tick
    }
}

pub struct BVCache {
    inner: Mutex<Inner>,
    capacity: usize,
    policy: CachePolicy,
    metrics: Option<Arc<Metrics>>,
}

impl BVCache {
    pub fn new(capacity: usize, policy: CachePolicy, metrics: Option<Arc<Metrics>>) -> Self {
        BVCache {
            inner: Mutex::new(Inner::default()),
            capacity,
            policy,
            metrics,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn charged(&self) -> usize {
        self.inner.lock().charged
    }

    pub fn len(&self) -> usize {
        self.inner.lock().index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn count(&self, c: Counter) {
        if let Some(m) = &self.metrics {
            m.add(c, 1);
        }
    }

    /// Inserts or refreshes `key`, evicting unpinned entries to make room.
    pub fn insert(&self, key: Key, voff: ValueOffset, resident: Option<Arc<[u8]>>) -> Result<()> {
        let mut inner = self.inner.lock();
        let new_charge = charge(&key, resident.as_deref());
        let previous = inner.index.get(&key).copied().map(|i| inner.remove(self.policy, i));
        if new_charge > self.capacity {
            return Err(Error::EntryTooLarge {
                charge: new_charge,
                capacity: self.capacity,
            });
        }
        while inner.charged + new_charge > self.capacity {
            if inner.evict_one(self.policy).is_none() {
                drop(inner);
                self.count(Counter::CachePinRejects);
                return Err(Error::AllPinned);
            }
        }
        let tick = inner.next_tick();
        let entry = CacheEntry {
            key: key.clone(),
            voff,
            resident,
            access_count: previous.map_or(1, |p| p.access_count + 1),
            last_access: tick,
        };
        let pinned = entry.pinned();
        let ok_entry = entry.clone();
        let i = inner.push_head(entry);
        if !pinned {
            inner.order.insert(Inner::order_key(self.policy, i, &ok_entry));
        }
        inner.index.insert(key, i);
        inner.charged += new_charge;
        Ok(())
    }

    /// Looks up `key`, bumping its access count and timestamp on a hit.
    pub fn get(&self, key: &Key) -> Option<(ValueOffset, Option<Arc<[u8]>>)> {
        let mut inner = self.inner.lock();
        let Some(&i) = inner.index.get(key) else {
            drop(inner);
            self.count(Counter::CacheMisses);
            return None;
        };
        let tick = inner.next_tick();
        let old = Inner::order_key(self.policy, i, &inner.slot(i).entry);
        let was_ordered = inner.order.remove(&old);
        let e = &mut inner.slot_mut(i).entry;
        e.access_count += 1;
        e.last_access = tick;
        let out = (e.voff, e.resident.clone());
        if was_ordered {
            let new = Inner::order_key(self.policy, i, &inner.slot(i).entry);
            inner.order.insert(new);
        }
        drop(inner);
        self.count(Counter::CacheHits);
        Some(out)
    }

    /// Snapshot of an entry without touching its counters.
    pub fn peek(&self, key: &Key) -> Option<CacheEntry> {
        let inner = self.inner.lock();
        inner.index.get(key).map(|&i| inner.slot(i).entry.clone())
    }

    /// Keys from head (newest write) to tail.
    pub fn keys_head_to_tail(&self) -> Vec<Key> {
        let inner = self.inner.lock();
        let mut out = Vec::new();
        let mut cur = inner.head;
        while let Some(i) = cur {
            out.push(inner.slot(i).entry.key.clone());
            cur = inner.slot(i).next;
        }
        out
    }

    /// Evicts one unpinned entry according to the policy.
    pub fn evict(&self) -> Result<Option<Key>> {
        let mut inner = self.inner.lock();
        if inner.index.is_empty() {
            return Ok(None);
        }
        inner.evict_one(self.policy).map(Some).ok_or(Error::AllPinned)
    }

    /// Releases resident bytes of `key`, keeping its pointer cached.
    pub fn on_persisted(&self, key: &Key) {
        self.release(key, None);
    }

    /// Like [`BVCache::on_persisted`], but only if the entry still points at `voff`.
    pub fn on_persisted_at(&self, key: &Key, voff: ValueOffset) {
        self.release(key, Some(voff));
    }

    fn release(&self, key: &Key, voff: Option<ValueOffset>) {
        let mut inner = self.inner.lock();
        let Some(&i) = inner.index.get(key) else {
            return;
        };
        let e = &mut inner.slot_mut(i).entry;
        if voff.is_some_and(|v| v != e.voff) {
            return;
        }
        let Some(bytes) = e.resident.take() else {
            return;
        };
        let ok = Inner::order_key(self.policy, i, &inner.slot(i).entry);
        inner.order.insert(ok);
        inner.charged -= bytes.len();
    }

    pub fn remove(&self, key: &Key) -> Option<CacheEntry> {
        let mut inner = self.inner.lock();
        let i = inner.index.get(key).copied()?;
        Some(inner.remove(self.policy, i))
    }

    pub fn clear(&self) {
        *self.inner.lock() = Inner::default();
    }

    /// Cross-checks deque, index, eviction order and charged size.
    pub fn check_consistency(&self) -> std::result::Result<(), String> {
        let inner = self.inner.lock();
        let mut seen = 0;
        let mut charged = 0;
        let mut unpinned = BTreeSet::new();
        let mut prev = None;
        let mut cur = inner.head;
        while let Some(i) = cur {
            let s = inner.slot(i);
            if s.prev != prev {
                return Err(format!("slot {i}: broken back link"));
            }
            if inner.index.get(&s.entry.key) != Some(&i) {
                return Err(format!("slot {i}: index disagrees"));
            }
            if s.entry.access_count == 0 {
                return Err(format!("slot {i}: zero access count"));
            }
            if !s.entry.pinned() {
                unpinned.insert(Inner::order_key(self.policy, i, &s.entry));
            }
            charged += s.entry.charge();
            seen += 1;
            prev = Some(i);
            cur = s.next;
        }
        if inner.tail != prev {
            return Err("tail does not end the list".into());
        }
        if seen != inner.index.len() {
            return Err(format!("{seen} listed vs {} indexed", inner.index.len()));
        }
        if charged != inner.charged {
            return Err(format!("charged {} vs recomputed {charged}", inner.charged));
        }
        if charged > self.capacity {
            return Err(format!("charged {charged} over capacity {}", self.capacity));
        }
        if unpinned != inner.order {
            return Err("eviction order disagrees with unpinned entries".into());
        }
        Ok(())
    }
}
