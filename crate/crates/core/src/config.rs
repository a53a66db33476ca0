use std::time::Duration;

use crate::error::{Error, Result};

pub const KIB: usize = 1024;
pub const MIB: usize = 1024 * KIB;

/// Durability mode of the write-ahead log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WalMode {
    /// Every record is written and synced before the write is acknowledged.
    Sync,
    /// Records are buffered and drained by a background context.
    Async,
    /// No log record is written.
    Disabled,
}

/// Whether big values leave the tree, or stay inline like a classic LSM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeparationMode {
    Separated,
    Inline,
}

/// How separated values are spread over value-log lanes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dispatch {
    RoundRobin,
    Hash,
}

/// Replacement policy of the big-value cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CachePolicy {
    /// Evict the least recently accessed entry.
    Recency,
    /// Evict the least frequently accessed entry; ties go to the older access.
    Frequency,
}

#[derive(Debug, Clone)]
pub struct Config {
    /// Values strictly longer than this are separated.
    pub separation_threshold: usize,
    pub separation: SeparationMode,
    pub memtable_size: usize,
    pub max_immutable_memtables: usize,
    pub l0_compaction_trigger: usize,
    /// Flushing pauses (and writers eventually stall) while L0 holds this many tables.
    pub l0_stop_writes_trigger: usize,
    pub level_size_ratio: u64,
    /// Size target of L1. Deeper levels multiply by `level_size_ratio`.
    pub level1_size_target: u64,
    /// Compaction outputs are cut once they reach this size.
    pub target_file_size: u64,
    pub block_size: usize,
    pub bloom_bits_per_key: usize,
    pub bvalue_lanes: usize,
    pub bvalue_file_rotate_size: u64,
    pub bvalue_dispatch: Dispatch,
    pub bvcache_capacity: usize,
    pub cache_policy: CachePolicy,
    pub wal_mode: WalMode,
    pub async_flush_interval: Duration,
    /// Async tail buffer size that forces an immediate drain.
    pub async_buffer_limit: usize,
    pub max_value_size: usize,
    /// Bucket width of the throughput interval series.
    pub metrics_interval: Duration,
}

impl Default for Config {
    fn default() -> Self {
        Config::with_memtable_size(128 * MIB)
    }
}

impl Config {
    /// Defaults with every memtable-derived size scaled from `memtable_size`.
    pub fn with_memtable_size(memtable_size: usize) -> Self {
        Config {
            separation_threshold: 4096,
            separation: SeparationMode::Separated,
            memtable_size,
            max_immutable_memtables: 2,
            l0_compaction_trigger: 4,
            l0_stop_writes_trigger: 12,
            level_size_ratio: 10,
            level1_size_target: 8 * memtable_size as u64,
            target_file_size: memtable_size as u64,
            block_size: 4 * KIB,
            bloom_bits_per_key: 10,
            bvalue_lanes: 4,
            bvalue_file_rotate_size: 256 * MIB as u64,
            bvalue_dispatch: Dispatch::RoundRobin,
            bvcache_capacity: memtable_size,
            cache_policy: CachePolicy::Recency,
            wal_mode: WalMode::Sync,
            async_flush_interval: Duration::from_millis(50),
            async_buffer_limit: MIB,
            max_value_size: 64 * MIB,
            metrics_interval: Duration::from_secs(10),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("memtable_size", self.memtable_size as u64),
            ("max_immutable_memtables", self.max_immutable_memtables as u64),
            ("l0_compaction_trigger", self.l0_compaction_trigger as u64),
            ("level1_size_target", self.level1_size_target),
            ("target_file_size", self.target_file_size),
            ("block_size", self.block_size as u64),
            ("bvalue_file_rotate_size", self.bvalue_file_rotate_size),
            ("bvcache_capacity", self.bvcache_capacity as u64),
            ("async_buffer_limit", self.async_buffer_limit as u64),
            ("max_value_size", self.max_value_size as u64),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.metrics_interval.is_zero() {
            return Err(Error::Config("metrics_interval must be positive".into()));
        }
        if self.bvalue_lanes == 0 {
            return Err(Error::Config("bvalue_lanes must be at least 1".into()));
        }
        if self.level_size_ratio < 2 {
            return Err(Error::Config("level_size_ratio must be at least 2".into()));
        }
        if self.l0_stop_writes_trigger < self.l0_compaction_trigger {
            return Err(Error::Config(
                "l0_stop_writes_trigger must not be below l0_compaction_trigger".into(),
            ));
        }
        if self.max_value_size > u32::MAX as usize {
            return Err(Error::Config("max_value_size must fit in 32 bits".into()));
        }
        Ok(())
    }

    /// Byte-size target of `level` (1-based; L0 is count-triggered).
    pub fn level_size_target(&self, level: usize) -> u64 {
        debug_assert!(level >= 1);
        let mut target = self.level1_size_target;
        for _ in 1..level {
            target = target.saturating_mul(self.level_size_ratio);
        }
        target
    }

    pub fn separates(&self, value_len: usize) -> bool {
        self.separation == SeparationMode::Separated && value_len > self.separation_threshold
    }
}
