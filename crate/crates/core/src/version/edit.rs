//! Manifest edit encoding: a sequence of tagged fields.
//!
//! ```text
//! 1 added table   level varint | file varint | size varint | entries varint
//!                 | min key (varint len + bytes) | max key (varint len + bytes)
//! 2 deleted file  file varint
//! 3 last seq      varint
//! 4 next file     varint
//! 5 wal retired   varint (segments numbered at or below it are obsolete)
//! ```

use crate::codec::{decode_uvarint, encode_uvarint};
use crate::error::{Error, Result};
use crate::sstable::TableMeta;
use crate::types::{Key, SequenceNumber};

const TAG_ADD: u64 = 1;
const TAG_DELETE: u64 = 2;
const TAG_LAST_SEQ: u64 = 3;
const TAG_NEXT_FILE: u64 = 4;
const TAG_WAL_RETIRED: u64 = 5;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VersionEdit {
    pub added: Vec<TableMeta>,
    pub deleted: Vec<u64>,
    pub last_seq: Option<SequenceNumber>,
    pub next_file: Option<u64>,
    pub wal_retired: Option<u64>,
}

impl VersionEdit {
    pub fn is_empty(&self) -> bool {
        *self == VersionEdit::default()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for m in &self.added {
            encode_uvarint(TAG_ADD, &mut out);
            for n in [m.level as u64, m.file_number, m.size, m.entries] {
                encode_uvarint(n, &mut out);
            }
            for k in [&m.min_key, &m.max_key] {
                encode_uvarint(k.len() as u64, &mut out);
                out.extend_from_slice(k.as_bytes());
            }
        }
        for f in &self.deleted {
            encode_uvarint(TAG_DELETE, &mut out);
            encode_uvarint(*f, &mut out);
        }
        let scalars = [
            (TAG_LAST_SEQ, self.last_seq),
            (TAG_NEXT_FILE, self.next_file),
            (TAG_WAL_RETIRED, self.wal_retired),
        ];
        for (tag, v) in scalars {
            if let Some(v) = v {
                encode_uvarint(tag, &mut out);
                encode_uvarint(v, &mut out);
            }
        }
        out
    }

    pub fn decode(mut buf: &[u8]) -> Result<Self> {
        fn varint(buf: &mut &[u8]) -> Result<u64> {
            let (v, n) = decode_uvarint(buf)?;
            *buf = &buf[n..];
            Ok(v)
        }
        fn key(buf: &mut &[u8]) -> Result<Key> {
            let len = varint(buf)? as usize;
            if buf.len() < len {
                return Err(Error::MalformedEntry("edit key truncated"));
            }
            let (k, rest) = buf.split_at(len);
            *buf = rest;
            Key::new(k)
        }
        let mut edit = VersionEdit::default();
        while !buf.is_empty() {
            match varint(&mut buf)? {
                TAG_ADD => {
                    let level = varint(&mut buf)? as usize;
                    if level >= super::NUM_LEVELS {
                        return Err(Error::MalformedEntry("edit level out of range"));
                    }
                    edit.added.push(TableMeta {
                        level,
                        file_number: varint(&mut buf)?,
                        size: varint(&mut buf)?,
                        entries: varint(&mut buf)?,
                        min_key: key(&mut buf)?,
                        max_key: key(&mut buf)?,
                    });
                }
                TAG_DELETE => edit.deleted.push(varint(&mut buf)?),
                TAG_LAST_SEQ => edit.last_seq = Some(varint(&mut buf)?),
                TAG_NEXT_FILE => edit.next_file = Some(varint(&mut buf)?),
                TAG_WAL_RETIRED => edit.wal_retired = Some(varint(&mut buf)?),
                _ => return Err(Error::MalformedEntry("unknown edit tag")),
            }
        }
        Ok(edit)
    }
}

#[cfg(test)]
mod tests_support {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn arb_edit() -> impl Strategy<Value = VersionEdit> {
        let meta = (
            0..super::super::NUM_LEVELS,
            any::<u64>(),
            any::<u64>(),
            any::<u64>(),
            prop::collection::vec(any::<u8>(), 1..40),
            prop::collection::vec(any::<u8>(), 1..40),
        )
            .prop_map(|(level, file_number, size, entries, a, b)| TableMeta {
                level,
                file_number,
                size,
                entries,
                min_key: Key::new(a).unwrap(),
                max_key: Key::new(b).unwrap(),
            });
        (
            prop::collection::vec(meta, 0..5),
            prop::collection::vec(any::<u64>(), 0..5),
            any::<Option<u64>>(),
            any::<Option<u64>>(),
            any::<Option<u64>>(),
        )
            .prop_map(|(added, deleted, last_seq, next_file, wal_retired)| VersionEdit {
                added,
                deleted,
                last_seq,
                next_file,
                wal_retired,
            })
    }
}

#[cfg(test)]
mod tests {
    use super::tests_support::arb_edit;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_edit_encodes_to_nothing() {
        assert!(VersionEdit::default().encode().is_empty());
        assert!(VersionEdit::decode(&[]).unwrap().is_empty());
    }

    #[test]
    fn unknown_tag_rejected() {
        assert!(VersionEdit::decode(&[9, 1]).is_err());
        assert!(VersionEdit::decode(&[TAG_DELETE as u8]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(edit in arb_edit()) {
            prop_assert_eq!(VersionEdit::decode(&edit.encode()).unwrap(), edit);
        }
    }
}
