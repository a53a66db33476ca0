//! Domain types shared by every layer of the store.

use std::borrow::Borrow;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub const MAX_KEY_LEN: usize = 4096;

/// A user key: 1..=4096 bytes, ordered by unsigned byte value.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Key(Arc<[u8]>);

impl Key {
    pub fn new(bytes: impl AsRef<[u8]>) -> Result<Self> {
        let bytes = bytes.as_ref();
        if bytes.is_empty() {
            return Err(Error::InvalidKey("empty key"));
        }
        if bytes.len() > MAX_KEY_LEN {
            return Err(Error::InvalidKey("key longer than 4096 bytes"));
        }
        Ok(Key(Arc::from(bytes)))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[u8]> for Key {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

impl Borrow<[u8]> for Key {
    fn borrow(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match std::str::from_utf8(&self.0) {
            Ok(s) if s.chars().all(|c| !c.is_control()) => write!(f, "Key({s:?})"),
            _ => write!(f, "Key(0x")
                .and_then(|_| self.0.iter().try_for_each(|b| write!(f, "{b:02x}")))
                .and_then(|_| write!(f, ")")),
        }
    }
}

/// Location of a separated value inside the value-log files.
///
/// `offset` points at the start of the record envelope, not at the value
/// bytes themselves; `length` is the value payload length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ValueOffset {
    pub file_id: u32,
    pub offset: u64,
    pub length: u32,
}

impl ValueOffset {
    pub const ENCODED_LEN: usize = 16;

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.file_id.to_le_bytes());
        out.extend_from_slice(&self.offset.to_le_bytes());
        out.extend_from_slice(&self.length.to_le_bytes());
    }

    pub fn encode(&self) -> [u8; Self::ENCODED_LEN] {
        let mut out = [0u8; Self::ENCODED_LEN];
        out[..4].copy_from_slice(&self.file_id.to_le_bytes());
        out[4..12].copy_from_slice(&self.offset.to_le_bytes());
        out[12..].copy_from_slice(&self.length.to_le_bytes());
        out
    }

    pub fn decode(buf: &[u8]) -> Option<Self> {
        if buf.len() < Self::ENCODED_LEN {
            return None;
        }
        Some(ValueOffset {
            file_id: u32::from_le_bytes(buf[..4].try_into().ok()?),
            offset: u64::from_le_bytes(buf[4..12].try_into().ok()?),
            length: u32::from_le_bytes(buf[12..16].try_into().ok()?),
        })
    }
}

pub type SequenceNumber = u64;

pub const MAX_SEQUENCE: SequenceNumber = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Put = 0,
    Delete = 1,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Inline(Vec<u8>),
    Pointer(ValueOffset),
    None,
}

impl Payload {
    /// Bytes this payload contributes to memtable accounting.
    pub fn charge(&self) -> usize {
        match self {
            Payload::Inline(v) => v.len(),
            Payload::Pointer(_) => ValueOffset::ENCODED_LEN,
            Payload::None => 0,
        }
    }
}

/// A sequenced write as it travels through the WAL, memtable and tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InternalEntry {
    pub key: Key,
    pub seq: SequenceNumber,
    pub kind: Kind,
    pub payload: Payload,
}

impl InternalEntry {
    pub fn put_inline(key: Key, seq: SequenceNumber, value: Vec<u8>) -> Self {
        InternalEntry {
            key,
            seq,
            kind: Kind::Put,
            payload: Payload::Inline(value),
        }
    }

    pub fn put_pointer(key: Key, seq: SequenceNumber, voff: ValueOffset) -> Self {
        InternalEntry {
            key,
            seq,
            kind: Kind::Put,
            payload: Payload::Pointer(voff),
        }
    }

    pub fn delete(key: Key, seq: SequenceNumber) -> Self {
        InternalEntry {
            key,
            seq,
            kind: Kind::Delete,
            payload: Payload::None,
        }
    }

    pub fn is_valid(&self) -> bool {
        match self.kind {
            Kind::Delete => matches!(self.payload, Payload::None),
            Kind::Put => !matches!(self.payload, Payload::None),
        }
    }
}
