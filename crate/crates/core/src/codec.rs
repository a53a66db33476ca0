//! Byte-level encodings: checksum, varints, the internal entry layout, and the
//! checksummed record envelope shared by the WAL and the manifest.
//!
//! Entry layout (all fixed-width integers little-endian):
//!
//! ```text
//! seq u64 | kind u8 | payload_tag u8 | key_len varint | key
//!   | Inline:  value_len varint | value
//!   | Pointer: file_id u32 | offset u64 | length u32
//!   | None:    (nothing)
//! ```
//!
//! Record envelope:
//!
//! ```text
//! crc u32 (over type + payload) | length u32 | type u8 | payload
//! ```

use crate::error::{Error, Result};
use crate::types::{InternalEntry, Key, Kind, Payload, ValueOffset};

pub const MAX_VARINT_LEN: usize = 10;

/// CRC-32C (Castagnoli).
pub fn checksum(bytes: &[u8]) -> u32 {
    crc32c::crc32c(bytes)
}

pub fn encode_uvarint(mut n: u64, out: &mut Vec<u8>) {
    while n >= 0x80 {
        out.push((n as u8 & 0x7f) | 0x80);
        n >>= 7;
    }
    out.push(n as u8);
}

pub fn uvarint_len(mut n: u64) -> usize {
    let mut len = 1;
    while n >= 0x80 {
        n >>= 7;
        len += 1;
    }
    len
}

/// Decodes a varint from the front of `buf`, returning the value and the
/// number of bytes consumed.
pub fn decode_uvarint(buf: &[u8]) -> Result<(u64, usize)> {
    let mut n: u64 = 0;
    for (i, &b) in buf.iter().take(MAX_VARINT_LEN).enumerate() {
        let low = (b & 0x7f) as u64;
        if i == MAX_VARINT_LEN - 1 && low > 1 {
            return Err(Error::MalformedVarint);
        }
        n |= low << (7 * i);
        if b & 0x80 == 0 {
            return Ok((n, i + 1));
        }
    }
    Err(Error::MalformedVarint)
}

const TAG_INLINE: u8 = 0;
const TAG_POINTER: u8 = 1;
const TAG_NONE: u8 = 2;

pub fn encoded_entry_len(e: &InternalEntry) -> usize {
    let key_len = e.key.len();
    let payload = match &e.payload {
        Payload::Inline(v) => uvarint_len(v.len() as u64) + v.len(),
        Payload::Pointer(_) => ValueOffset::ENCODED_LEN,
        Payload::None => 0,
    };
    8 + 1 + 1 + uvarint_len(key_len as u64) + key_len + payload
}

pub fn encode_entry_into(e: &InternalEntry, out: &mut Vec<u8>) {
    out.reserve(encoded_entry_len(e));
    out.extend_from_slice(&e.seq.to_le_bytes());
    out.push(e.kind as u8);
    let tag = match e.payload {
        Payload::Inline(_) => TAG_INLINE,
        Payload::Pointer(_) => TAG_POINTER,
        Payload::None => TAG_NONE,
    };
    out.push(tag);
    encode_uvarint(e.key.len() as u64, out);
    out.extend_from_slice(e.key.as_bytes());
    match &e.payload {
        Payload::Inline(v) => {
            encode_uvarint(v.len() as u64, out);
            out.extend_from_slice(v);
        }
        Payload::Pointer(p) => p.encode_into(out),
        Payload::None => {}
    }
}

pub fn encode_entry(e: &InternalEntry) -> Vec<u8> {
    let mut out = Vec::with_capacity(encoded_entry_len(e));
    encode_entry_into(e, &mut out);
    out
}

/// Decodes exactly one entry occupying all of `buf`.
pub fn decode_entry(buf: &[u8]) -> Result<InternalEntry> {
    let (e, used) = decode_entry_prefix(buf)?;
    if used != buf.len() {
        return Err(Error::MalformedEntry("trailing bytes"));
    }
    Ok(e)
}

/// Decodes one entry from the front of `buf`; entries are self-delimiting so
/// they can be stored back to back.
pub fn decode_entry_prefix(buf: &[u8]) -> Result<(InternalEntry, usize)> {
    let truncated = Error::MalformedEntry("truncated");
    if buf.len() < 10 {
        return Err(truncated);
    }
    let seq = u64::from_le_bytes(buf[..8].try_into().expect("8 bytes"));
    let kind = match buf[8] {
        0 => Kind::Put,
        1 => Kind::Delete,
        _ => return Err(Error::MalformedEntry("bad kind")),
    };
    let tag = buf[9];
    let mut pos = 10;
    let (key_len, n) =
        decode_uvarint(&buf[pos..]).map_err(|_| Error::MalformedEntry("bad key length"))?;
    pos += n;
    let key_len = key_len as usize;
    if buf.len() - pos < key_len {
        return Err(truncated);
    }
    let key = Key::new(&buf[pos..pos + key_len]).map_err(|_| Error::MalformedEntry("bad key"))?;
    pos += key_len;
    let payload = match tag {
        TAG_INLINE => {
            let (len, n) = decode_uvarint(&buf[pos..])
                .map_err(|_| Error::MalformedEntry("bad value length"))?;
            pos += n;
            let len = len as usize;
            if buf.len() - pos < len {
                return Err(truncated);
            }
            let v = buf[pos..pos + len].to_vec();
            pos += len;
            Payload::Inline(v)
        }
        TAG_POINTER => {
            let p = ValueOffset::decode(&buf[pos..]).ok_or(truncated)?;
            pos += ValueOffset::ENCODED_LEN;
            Payload::Pointer(p)
        }
        TAG_NONE => Payload::None,
        _ => return Err(Error::MalformedEntry("bad payload tag")),
    };
    let entry = InternalEntry {
        key,
        seq,
        kind,
        payload,
    };
    if !entry.is_valid() {
        return Err(Error::MalformedEntry("kind and payload disagree"));
    }
    Ok((entry, pos))
}

pub const RECORD_HEADER_LEN: usize = 9;
pub const RECORD_TYPE_FULL: u8 = 1;

pub fn encode_record_into(payload: &[u8], out: &mut Vec<u8>) {
    let mut crc = crc32c::crc32c(&[RECORD_TYPE_FULL]);
    crc = crc32c::crc32c_append(crc, payload);
    out.reserve(RECORD_HEADER_LEN + payload.len());
    out.extend_from_slice(&crc.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.push(RECORD_TYPE_FULL);
    out.extend_from_slice(payload);
}

pub fn encode_record(payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(RECORD_HEADER_LEN + payload.len());
    encode_record_into(payload, &mut out);
    out
}

/// Outcome of walking a sequence of envelopes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RecordScan {
    pub records_ok: usize,
    /// Byte length of the well-formed prefix.
    pub valid_len: usize,
    /// A partial or corrupt record stopped the walk.
    pub truncated: bool,
}

/// Walks back-to-back envelopes in `buf`, calling `visit` with each verified
/// payload. Stops at the first incomplete or corrupt record.
pub fn scan_records<'a, F>(buf: &'a [u8], mut visit: F) -> Result<RecordScan>
where
    F: FnMut(&'a [u8]) -> Result<()>,
{
    let mut scan = RecordScan::default();
    let mut pos = 0;
    while pos < buf.len() {
        let rest = &buf[pos..];
        if rest.len() < RECORD_HEADER_LEN {
            scan.truncated = true;
            break;
        }
        let crc = u32::from_le_bytes(rest[..4].try_into().expect("4 bytes"));
        let len = u32::from_le_bytes(rest[4..8].try_into().expect("4 bytes")) as usize;
        let ty = rest[8];
        if ty != RECORD_TYPE_FULL || rest.len() - RECORD_HEADER_LEN < len {
            scan.truncated = true;
            break;
        }
        let payload = &rest[RECORD_HEADER_LEN..RECORD_HEADER_LEN + len];
        let actual = crc32c::crc32c_append(crc32c::crc32c(&[ty]), payload);
        if actual != crc {
            scan.truncated = true;
            break;
        }
        visit(payload)?;
        pos += RECORD_HEADER_LEN + len;
        scan.records_ok += 1;
        scan.valid_len = pos;
    }
    Ok(scan)
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn arb_entry() -> impl Strategy<Value = InternalEntry> {
        let key = proptest::collection::vec(any::<u8>(), 1..64).prop_map(|k| Key::new(k).unwrap());
        let payload = prop_oneof![
            proptest::collection::vec(any::<u8>(), 0..256).prop_map(Payload::Inline),
            (any::<u32>(), any::<u64>(), any::<u32>()).prop_map(|(file_id, offset, length)| {
                Payload::Pointer(ValueOffset {
                    file_id,
                    offset,
                    length,
                })
            }),
            Just(Payload::None),
        ];
        (key, any::<u64>(), payload).prop_map(|(key, seq, payload)| {
            let kind = if payload == Payload::None {
                Kind::Delete
            } else {
                Kind::Put
            };
            InternalEntry {
                key,
                seq,
                kind,
                payload,
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::tests_support::arb_entry;
    use super::*;
    use proptest::prelude::*;

    /// Bit-at-a-time reflected CRC-32C, independent of the table-driven crate.
    fn crc32c_bitwise(bytes: &[u8]) -> u32 {
        let mut crc = !0u32;
        for &b in bytes {
            crc ^= b as u32;
            for _ in 0..8 {
                let mask = (crc & 1).wrapping_neg();
                crc = (crc >> 1) ^ (0x82F6_3B78 & mask);
            }
        }
        !crc
    }

    #[test]
    fn checksum_check_values() {
        assert_eq!(checksum(b""), 0);
        assert_eq!(crc32c_bitwise(b"123456789"), 0xE306_9283);
        assert_eq!(checksum(b"123456789"), 0xE306_9283);
        let data = b"some bytes".to_vec();
        assert_eq!(checksum(&data), checksum(&data.clone()));
    }

    proptest! {
        #[test]
        fn checksum_matches_bitwise_oracle(data in proptest::collection::vec(any::<u8>(), 0..512)) {
            prop_assert_eq!(checksum(&data), crc32c_bitwise(&data));
        }
    }

    #[test]
    fn varint_examples() {
        let mut out = Vec::new();
        encode_uvarint(0, &mut out);
        assert_eq!(out, [0x00]);
        out.clear();
        encode_uvarint(300, &mut out);
        assert_eq!(out, [0xAC, 0x02]);
        assert_eq!(decode_uvarint(&out).unwrap(), (300, 2));
        out.clear();
        encode_uvarint(u64::MAX, &mut out);
        assert_eq!(out.len(), 10);
        assert_eq!(decode_uvarint(&out).unwrap(), (u64::MAX, 10));
    }

    #[test]
    fn varint_rejects_unterminated() {
        assert!(matches!(decode_uvarint(&[0x80; 10]), Err(Error::MalformedVarint)));
        assert!(matches!(decode_uvarint(&[0x80; 3]), Err(Error::MalformedVarint)));
        assert!(matches!(decode_uvarint(&[]), Err(Error::MalformedVarint)));
        // Tenth byte may only carry the top bit of a u64.
        let mut overflow = vec![0xff; 9];
        overflow.push(0x02);
        assert!(matches!(decode_uvarint(&overflow), Err(Error::MalformedVarint)));
    }

    #[test]
    fn varint_round_trip_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut buf = Vec::new();
        for _ in 0..100_000 {
            let shift = rng.random_range(0..64);
            let n: u64 = rng.random::<u64>() >> shift;
            buf.clear();
            encode_uvarint(n, &mut buf);
            assert_eq!(buf.len(), uvarint_len(n));
            assert_eq!(decode_uvarint(&buf).unwrap(), (n, buf.len()));
        }
    }

    fn key(s: &[u8]) -> Key {
        Key::new(s).unwrap()
    }

    #[test]
    fn empty_inline_value_is_thirteen_bytes() {
        let e = InternalEntry::put_inline(key(b"k"), 1, Vec::new());
        let enc = encode_entry(&e);
        assert_eq!(enc.len(), 13);
        assert_eq!(*enc.last().unwrap(), 0);
        assert_eq!(decode_entry(&enc).unwrap(), e);
    }

    #[test]
    fn pointer_entry_is_forty_three_bytes() {
        let voff = ValueOffset {
            file_id: 2,
            offset: 4096,
            length: 65536,
        };
        let e = InternalEntry::put_pointer(key(&[b'x'; 16]), 7, voff);
        let enc = encode_entry(&e);
        assert_eq!(enc.len(), 8 + 1 + 1 + 1 + 16 + 16);
        assert_eq!(encoded_entry_len(&e), 43);
        assert_eq!(decode_entry(&enc).unwrap(), e);
    }

    #[test]
    fn decode_rejects_garbage() {
        let e = InternalEntry::delete(key(b"gone"), 3);
        let mut enc = encode_entry(&e);
        assert_eq!(decode_entry(&enc).unwrap(), e);
        enc[9] = 0; // claim Inline on a delete
        assert!(matches!(decode_entry(&enc), Err(Error::MalformedEntry(_))));
        enc[9] = 9;
        assert!(matches!(decode_entry(&enc), Err(Error::MalformedEntry(_))));
        let good = encode_entry(&InternalEntry::put_inline(key(b"a"), 1, vec![1, 2, 3]));
        assert!(decode_entry(&good[..good.len() - 1]).is_err());
    }

    proptest! {
        #[test]
        fn entry_round_trip(e in arb_entry()) {
            let enc = encode_entry(&e);
            prop_assert_eq!(enc.len(), encoded_entry_len(&e));
            prop_assert_eq!(decode_entry(&enc).unwrap(), e);
        }

        #[test]
        fn records_round_trip_with_torn_tail(
            payloads in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 0..128), 0..16),
            cut in any::<proptest::sample::Index>(),
        ) {
            let mut buf = Vec::new();
            let mut ends = Vec::new();
            for p in &payloads {
                encode_record_into(p, &mut buf);
                ends.push(buf.len());
            }
            let mut seen = Vec::new();
            let scan = scan_records(&buf, |p| { seen.push(p.to_vec()); Ok(()) }).unwrap();
            prop_assert_eq!(&seen, &payloads);
            prop_assert!(!scan.truncated);

            let cut = if buf.is_empty() { 0 } else { cut.index(buf.len() + 1) };
            let whole = ends.iter().filter(|&&e| e <= cut).count();
            let mut seen = Vec::new();
            let scan = scan_records(&buf[..cut], |p| { seen.push(p.to_vec()); Ok(()) }).unwrap();
            prop_assert_eq!(scan.records_ok, whole);
            prop_assert_eq!(&seen[..], &payloads[..whole]);
            prop_assert_eq!(scan.truncated, ends.get(whole.wrapping_sub(1)).copied().unwrap_or(0) != cut);
        }
    }

    #[test]
    fn corrupt_record_stops_scan() {
        let mut buf = Vec::new();
        for p in [b"one".as_slice(), b"two", b"three"] {
            encode_record_into(p, &mut buf);
        }
        let second = RECORD_HEADER_LEN + 3;
        buf[second + RECORD_HEADER_LEN] ^= 0xff;
        let mut n = 0;
        let scan = scan_records(&buf, |_| {
            n += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!((scan.records_ok, scan.truncated, n), (1, true, 1));
    }
}
