//! Leveled compaction over keys and pointers. Value-log files are never
//! opened here: a pointer is copied as its 16 encoded bytes.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::Arc;

use super::{Version, VersionEdit, VersionSet, NUM_LEVELS};
use crate::bvstore::{self, CompactionScope};
use crate::config::Config;
use crate::error::Result;
use crate::fault::Faults;
use crate::metrics::{Counter, Metrics};
use crate::sstable::{table_path, BuildOptions, Table, TableBuilder, TableMeta};
use crate::types::{InternalEntry, Key, Kind, Payload};

#[derive(Debug, Clone)]
pub struct CompactionJob {
    pub level: usize,
    pub inputs: Vec<Arc<Table>>,
    pub next_inputs: Vec<Arc<Table>>,
}

impl CompactionJob {
    pub fn output_level(&self) -> usize {
        self.level + 1
    }

    pub fn all_inputs(&self) -> impl Iterator<Item = &Arc<Table>> {
        self.inputs.iter().chain(&self.next_inputs)
    }
}

/// Byte accounting of one finished compaction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CompactionStats {
    pub read_bytes: u64,
    pub write_bytes: u64,
    pub dead_value_bytes: u64,
}

impl CompactionStats {
    pub fn record(&self, metrics: &Metrics) {
        metrics.add(Counter::CompactionReadBytes, self.read_bytes);
        metrics.add(Counter::CompactionWriteBytes, self.write_bytes);
        metrics.add(Counter::BvalueDeadBytes, self.dead_value_bytes);
        metrics.add(Counter::Compactions, 1);
    }
}

fn key_span<'a>(tables: impl Iterator<Item = &'a Arc<Table>>) -> Option<(Key, Key)> {
    tables.fold(None, |acc, t| {
        let m = t.meta();
        Some(match acc {
            None => (m.min_key.clone(), m.max_key.clone()),
            Some((lo, hi)) => (lo.min(m.min_key.clone()), hi.max(m.max_key.clone())),
        })
    })
}

fn l0_job(v: &Version) -> Option<CompactionJob> {
    let inputs = v.level(0).to_vec();
    let (lo, hi) = key_span(inputs.iter())?;
    Some(CompactionJob {
        level: 0,
        next_inputs: v.overlapping(1, lo.as_bytes(), hi.as_bytes()),
        inputs,
    })
}

/// Chooses the next job: all of L0 once it reaches the trigger, otherwise
/// one table from the level furthest over its size target.
pub fn pick(v: &Version, config: &Config, cursors: &mut [Option<Vec<u8>>]) -> Option<CompactionJob> {
    if v.level(0).len() >= config.l0_compaction_trigger {
        return l0_job(v);
    }
    let (level, _) = (1..NUM_LEVELS - 1)
        .map(|l| (l, v.level_bytes(l) as f64 / config.level_size_target(l) as f64))
        .filter(|&(_, score)| score > 1.0)
        .max_by(|a, b| a.1.total_cmp(&b.1))?;
    let tables = v.level(level);
    let start = cursors[level]
        .as_deref()
        .map_or(0, |c| tables.partition_point(|t| t.meta().min_key.as_bytes() <= c));
    let table = tables.get(start).unwrap_or(&tables[0]).clone();
    cursors[level] = Some(table.meta().max_key.as_bytes().to_vec());
    let m = table.meta();
    Some(CompactionJob {
        level,
        next_inputs: v.overlapping(level + 1, m.min_key.as_bytes(), m.max_key.as_bytes()),
        inputs: vec![table],
    })
}

/// Like [`pick`], but any non-empty L0 qualifies.
pub fn pick_forced(v: &Version, config: &Config, cursors: &mut [Option<Vec<u8>>]) -> Option<CompactionJob> {
    if !v.level(0).is_empty() {
        return l0_job(v);
    }
    pick(v, config, cursors)
}

/// K-way merge of sorted entry streams into (key asc, seq desc) order.
pub struct MergeIter<I> {
    sources: Vec<I>,
    heads: Vec<Option<InternalEntry>>,
    heap: BinaryHeap<Reverse<(Key, Reverse<u64>, usize)>>,
    error: Option<crate::error::Error>,
}

impl<I: Iterator<Item = Result<InternalEntry>>> MergeIter<I> {
    pub fn new(sources: Vec<I>) -> Self {
        let n = sources.len();
        let mut it = MergeIter {
            sources,
            heads: vec![None; n],
            heap: BinaryHeap::new(),
            error: None,
        };
        for i in 0..n {
            it.advance(i);
        }
        it
    }

    fn advance(&mut self, i: usize) {
        match self.sources[i].next() {
            Some(Ok(e)) => {
                self.heap.push(Reverse((e.key.clone(), Reverse(e.seq), i)));
                self.heads[i] = Some(e);
            }
            Some(Err(e)) => self.error = Some(e),
            None => self.heads[i] = None,
        }
    }
}

impl<I: Iterator<Item = Result<InternalEntry>>> Iterator for MergeIter<I> {
    type Item = Result<InternalEntry>;

    fn next(&mut self) -> Option<Self::Item> {
        if let Some(e) = self.error.take() {
            return Some(Err(e));
        }
        let Reverse((_, _, i)) = self.heap.pop()?;
        let e = self.heads[i].take().expect("heap entries have heads");
        self.advance(i);
        Some(Ok(e))
    }
}

fn dead_bytes(e: &InternalEntry) -> u64 {
    match (&e.kind, &e.payload) {
        (Kind::Put, Payload::Pointer(v)) => bvstore::record_len(e.key.len(), v.length as usize),
        _ => 0,
    }
}

/// Keeps only the newest entry per key of a sorted stream. Returns the
/// survivors and the value-log bytes the dropped pointers referenced.
pub fn dedupe_newest(entries: impl IntoIterator<Item = InternalEntry>) -> (Vec<InternalEntry>, u64) {
    let mut out: Vec<InternalEntry> = Vec::new();
    let mut dead = 0;
    for e in entries {
        if out.last().is_some_and(|p| p.key == e.key) {
            dead += dead_bytes(&e);
        } else {
            out.push(e);
        }
    }
    (out, dead)
}

/// Runs `job` against `version` and writes its outputs. The returned edit
/// still has to be committed.
pub fn run(
    job: &CompactionJob,
    version: &Version,
    vset: &VersionSet,
    config: &Config,
    faults: &Faults,
) -> Result<(VersionEdit, CompactionStats)> {
    let _scope = CompactionScope::enter();
    let out_level = job.output_level();
    let opts = BuildOptions {
        block_size: config.block_size,
        bloom_bits_per_key: config.bloom_bits_per_key,
    };
    let mut stats = CompactionStats {
        read_bytes: job.all_inputs().map(|t| t.meta().size).sum(),
        ..Default::default()
    };
    let mut outputs: Vec<TableMeta> = Vec::new();
    let mut builder = TableBuilder::new(opts);
    let finish = |builder: TableBuilder, outputs: &mut Vec<TableMeta>| -> Result<()> {
        let n = vset.new_file_number();
        let mut meta = builder.finish(&table_path(vset.sst_dir(), n), n, faults)?;
        meta.level = out_level;
        outputs.push(meta);
        Ok(())
    };

    let merge = MergeIter::new(job.all_inputs().map(|t| t.iter_all()).collect());
    let mut prev: Option<Key> = None;
    for e in merge {
        let e = e?;
        if prev.as_ref() == Some(&e.key) {
            stats.dead_value_bytes += dead_bytes(&e);
            continue;
        }
        prev = Some(e.key.clone());
        if e.kind == Kind::Delete && !version.overlaps_below(out_level, e.key.as_bytes()) {
            continue;
        }
        if !builder.is_empty() && builder.estimated_size() >= config.target_file_size {
            finish(std::mem::replace(&mut builder, TableBuilder::new(opts)), &mut outputs)?;
        }
        builder.add(&e)?;
    }
    if !builder.is_empty() {
        finish(builder, &mut outputs)?;
    }
    stats.write_bytes = outputs.iter().map(|m| m.size).sum();
    let edit = VersionEdit {
        added: outputs,
        deleted: job.all_inputs().map(|t| t.meta().file_number).collect(),
        ..Default::default()
    };
    Ok((edit, stats))
}
