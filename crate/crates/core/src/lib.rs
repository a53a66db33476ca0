//! A log-structured key-value store that keeps large values out of the
//! LSM tree. Values above a size threshold go to multi-lane append-only
//! value logs; the tree stores a 16-byte pointer in their place.

pub mod bench;
pub mod bvcache;
pub mod bvstore;
pub mod codec;
pub mod config;
pub mod engine;
pub mod error;
pub mod fault;
pub mod memtable;
pub mod metrics;
pub mod sstable;
pub mod types;
pub mod version;
pub mod wal;

pub use config::{CachePolicy, Config, Dispatch, SeparationMode, WalMode};
pub use error::{Error, Result};
pub use metrics::{Counter, Metrics, MetricsSnapshot};
pub use types::{InternalEntry, Key, Kind, Payload, SequenceNumber, ValueOffset};
pub use engine::{Engine, WriteOptions};
