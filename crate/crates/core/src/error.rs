use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("malformed varint")]
    MalformedVarint,

    #[error("malformed entry: {0}")]
    MalformedEntry(&'static str),

    #[error("invalid key: {0}")]
    InvalidKey(&'static str),

    #[error("value of {len} bytes exceeds the {max} byte limit")]
    ValueTooLarge { len: usize, max: usize },

    #[error("write-ahead log is closed")]
    LogClosed,

    #[error("value store is closed")]
    StoreClosed,

    #[error("corrupt value record at file {file_id} offset {offset}: {reason}")]
    CorruptRecord {
        file_id: u32,
        offset: u64,
        reason: &'static str,
    },

    #[error("value offset was never handed out: file {file_id} offset {offset}")]
    NotYetDurable { file_id: u32, offset: u64 },

    #[error("insert into an immutable memtable")]
    ImmutableViolation,

    #[error("table builder input is not sorted")]
    UnsortedInput,

    #[error("corrupt table {file_number}: {reason}")]
    CorruptTable {
        file_number: u64,
        reason: &'static str,
    },

    #[error("corrupt store: {0}")]
    CorruptStore(String),

    #[error("cache entry of {charge} bytes exceeds capacity {capacity}")]
    EntryTooLarge { charge: usize, capacity: usize },

    #[error("every cache entry is pinned by a pending value")]
    AllPinned,

    #[error("engine is closed")]
    EngineClosed,

    #[error("background work failed: {0}")]
    Background(String),

    #[error("op {op}: {source}")]
    Op {
        op: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown counter `{0}`")]
    UnknownCounter(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Raised by an armed fault injector; the engine behaves as if the process died.
    #[error("injected crash at {0}")]
    Crashed(&'static str),
}

impl Error {
    pub fn is_crash(&self) -> bool {
        match self {
            Error::Crashed(_) => true,
            Error::Op { source, .. } => source.is_crash(),
            _ => false,
        }
    }

    pub(crate) fn at_op(self, op: u64) -> Error {
        Error::Op {
            op,
            source: Box::new(self),
        }
    }
}
