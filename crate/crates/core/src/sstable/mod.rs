//! Immutable sorted tables.
//!
//! ```text
//! data blocks   entries back to back, cut once a block reaches block_size
//! index block   per data block: last_key_len varint | last_key | offset u64 | len u32
//! bloom block   bit array | k u8
//! footer        index off u64 | index len u32 | bloom off u64 | bloom len u32
//!               | entry count u64 | min key (varint len + bytes)
//!               | max key (varint len + bytes) | footer len u32 | "SST1"
//!               | crc32c of every preceding footer byte
//! ```
//!
//! All integers are little-endian.

mod bloom;
mod builder;
mod reader;

use std::path::{Path, PathBuf};

pub use bloom::Bloom;
pub use builder::{build, TableBuilder};
pub use reader::{Table, TableIter};

use crate::types::Key;

pub const MAGIC: [u8; 4] = *b"SST1";
/// footer len + magic + crc
const FOOTER_TAIL: usize = 12;

pub fn table_path(dir: &Path, file_number: u64) -> PathBuf {
    dir.join(format!("{file_number:010}.sst"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableMeta {
    pub file_number: u64,
    pub level: usize,
    pub size: u64,
    pub min_key: Key,
    pub max_key: Key,
    pub entries: u64,
}

impl TableMeta {
    pub fn overlaps(&self, lo: &[u8], hi: &[u8]) -> bool {
        self.min_key.as_bytes() <= hi && lo <= self.max_key.as_bytes()
    }

    pub fn contains(&self, key: &[u8]) -> bool {
        self.overlaps(key, key)
    }
}

/// Knobs the builder needs.
#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub block_size: usize,
    pub bloom_bits_per_key: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            block_size: 4096,
            bloom_bits_per_key: 10,
        }
    }
}
