use std::borrow::Borrow;
use std::fs::File;
use std::path::Path;

use super::{Bloom, BuildOptions, TableMeta, MAGIC};
use crate::codec::{checksum, encode_entry_into, encode_uvarint};
use crate::error::{Error, Result};
use crate::fault::Faults;
use crate::types::{InternalEntry, Key};

/// Accumulates sorted entries into an in-memory table image.
pub struct TableBuilder {
    opts: BuildOptions,
    buf: Vec<u8>,
    block_start: usize,
    index: Vec<u8>,
    keys: Vec<Key>,
    count: u64,
    first: Option<Key>,
    last: Option<(Key, u64)>,
}

impl TableBuilder {
    pub fn new(opts: BuildOptions) -> Self {
        TableBuilder {
            opts,
            buf: Vec::new(),
            block_start: 0,
            index: Vec::new(),
            keys: Vec::new(),
            count: 0,
            first: None,
            last: None,
        }
    }

    pub fn add(&mut self, e: &InternalEntry) -> Result<()> {
        if let Some((k, s)) = &self.last {
            let ordered = match k.cmp(&e.key) {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Equal => *s > e.seq,
                std::cmp::Ordering::Greater => false,
            };
            if !ordered {
                return Err(Error::UnsortedInput);
            }
            if *k != e.key {
                self.keys.push(e.key.clone());
            }
        } else {
            self.first = Some(e.key.clone());
            self.keys.push(e.key.clone());
        }
        encode_entry_into(e, &mut self.buf);
        self.count += 1;
        self.last = Some((e.key.clone(), e.seq));
        if self.buf.len() - self.block_start >= self.opts.block_size {
            self.cut_block();
        }
        Ok(())
    }

    fn cut_block(&mut self) {
        let len = self.buf.len() - self.block_start;
        if len == 0 {
            return;
        }
        let last = &self.last.as_ref().expect("non-empty block has a last key").0;
        encode_uvarint(last.len() as u64, &mut self.index);
        self.index.extend_from_slice(last.as_bytes());
        self.index.extend_from_slice(&(self.block_start as u64).to_le_bytes());
        self.index.extend_from_slice(&(len as u32).to_le_bytes());
        self.block_start = self.buf.len();
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Bytes of data written so far; close to the final file size.
    pub fn estimated_size(&self) -> u64 {
        (self.buf.len() + self.index.len() + self.keys.len() * self.opts.bloom_bits_per_key / 8) as u64
    }

    /// Writes the table to `path`, syncs it and returns its metadata.
    pub fn finish(mut self, path: &Path, file_number: u64, faults: &Faults) -> Result<TableMeta> {
        if self.count == 0 {
            return Err(Error::MalformedEntry("empty table"));
        }
        self.cut_block();
        let index_off = self.buf.len() as u64;
        let index_len = self.index.len() as u32;
        self.buf.append(&mut self.index);

        let bloom = Bloom::build(
            self.keys.iter().map(|k| k.as_bytes()),
            self.opts.bloom_bits_per_key,
        );
        let bloom_off = self.buf.len() as u64;
        bloom.encode_into(&mut self.buf);
        let bloom_len = (self.buf.len() as u64 - bloom_off) as u32;

        let min_key = self.first.take().expect("count > 0");
        let max_key = self.last.take().expect("count > 0").0;
        let footer_start = self.buf.len();
        let b = &mut self.buf;
        b.extend_from_slice(&index_off.to_le_bytes());
        b.extend_from_slice(&index_len.to_le_bytes());
        b.extend_from_slice(&bloom_off.to_le_bytes());
        b.extend_from_slice(&bloom_len.to_le_bytes());
        b.extend_from_slice(&self.count.to_le_bytes());
        for k in [&min_key, &max_key] {
            encode_uvarint(k.len() as u64, b);
            b.extend_from_slice(k.as_bytes());
        }
        let footer_len = (b.len() - footer_start + super::FOOTER_TAIL) as u32;
        b.extend_from_slice(&footer_len.to_le_bytes());
        b.extend_from_slice(&MAGIC);
        let crc = checksum(&b[footer_start..]);
        b.extend_from_slice(&crc.to_le_bytes());

        let mut file = File::create(path)?;
        faults.created(path);
        faults.write(&mut file, &self.buf, "sst.write")?;
        faults.sync(&file, path, self.buf.len() as u64, "sst.sync")?;
        if let Some(parent) = path.parent() {
            File::open(parent)?.sync_all()?;
        }
        Ok(TableMeta {
            file_number,
            level: 0,
            size: self.buf.len() as u64,
            min_key,
            max_key,
            entries: self.count,
        })
    }
}

/// Builds one table from an already sorted run of entries.
pub fn build<I>(path: &Path, entries: I, file_number: u64, opts: BuildOptions, faults: &Faults) -> Result<TableMeta>
where
    I: IntoIterator,
    I::Item: Borrow<InternalEntry>,
{
    let mut builder = TableBuilder::new(opts);
    for e in entries {
        builder.add(e.borrow())?;
    }
    builder.finish(path, file_number, faults)
}
