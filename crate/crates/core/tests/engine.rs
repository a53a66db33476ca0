use std::time::Duration;

use sepkv::config::KIB;
use sepkv::{Config, Counter, Engine, SeparationMode, WalMode, WriteOptions};

fn small(mode: WalMode) -> Config {
    let mut c = Config::with_memtable_size(256 * KIB);
    c.wal_mode = mode;
    c
}

fn value(seed: u8, len: usize) -> Vec<u8> {
    (0..len).map(|i| seed.wrapping_add(i as u8).wrapping_mul(31)).collect()
}

#[test]
fn small_values_stay_inline() {
    let dir = tempfile::tempdir().unwrap();
    let db = Engine::open(dir.path(), small(WalMode::Sync)).unwrap();
    db.put(b"k", &value(1, 100), WriteOptions::default()).unwrap();
    let s = db.stats();
    assert_eq!(s.get(Counter::BvalueBytes), 0);
    assert_eq!(db.get(b"k").unwrap(), Some(value(1, 100)));
}

#[test]
fn big_sync_put_logs_a_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let db = Engine::open(dir.path(), small(WalMode::Sync)).unwrap();
    let v = value(2, 64 * 1024);
    db.put(b"0123456789abcdef", &v, WriteOptions::default()).unwrap();
    let s = db.stats();
    assert_eq!(s.get(Counter::WalBytes), 52);
    // "BVL1" + crc + varint(16) + 16 + varint(65536) + 65536
    assert_eq!(s.get(Counter::BvalueBytes), 8 + 1 + 16 + 3 + 65536);
    assert_eq!(db.get(b"0123456789abcdef").unwrap(), Some(v));
}

#[test]
fn threshold_is_strict() {
    let dir = tempfile::tempdir().unwrap();
    let db = Engine::open(dir.path(), small(WalMode::Sync)).unwrap();
    db.put(b"a", &value(3, 4096), WriteOptions::default()).unwrap();
    assert_eq!(db.stats().get(Counter::BvalueAppends), 0);
    db.put(b"b", &value(3, 4097), WriteOptions::default()).unwrap();
    assert_eq!(db.stats().get(Counter::BvalueAppends), 1);
}

#[test]
fn inline_mode_never_separates() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(WalMode::Sync);
    c.separation = SeparationMode::Inline;
    let db = Engine::open(dir.path(), c).unwrap();
    db.put(b"k", &value(4, 64 * 1024), WriteOptions::default()).unwrap();
    assert_eq!(db.stats().get(Counter::BvalueBytes), 0);
    assert!(db.stats().get(Counter::WalBytes) > 64 * 1024);
}

#[test]
fn read_your_writes_in_every_mode() {
    for mode in [WalMode::Sync, WalMode::Async, WalMode::Disabled] {
        let dir = tempfile::tempdir().unwrap();
        let db = Engine::open(dir.path(), small(mode)).unwrap();
        for i in 0..200u32 {
            let len = if i % 3 == 0 { 10_000 } else { 50 };
            let k = format!("key{i:05}");
            db.put(k.as_bytes(), &value(i as u8, len), WriteOptions::default()).unwrap();
            assert_eq!(db.get(k.as_bytes()).unwrap(), Some(value(i as u8, len)), "{mode:?} {i}");
        }
        db.delete(b"key00003", WriteOptions::default()).unwrap();
        assert_eq!(db.get(b"key00003").unwrap(), None);
    }
}

#[test]
fn async_get_served_from_cache() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(WalMode::Async);
    c.async_flush_interval = Duration::from_secs(3600);
    let db = Engine::open(dir.path(), c).unwrap();
    let v = value(9, 64 * 1024);
    db.put(b"big", &v, WriteOptions::default()).unwrap();
    let before = db.stats().get(Counter::BvalueReads);
    assert_eq!(db.get(b"big").unwrap(), Some(v));
    assert_eq!(db.stats().get(Counter::BvalueReads), before);
}

#[test]
fn reopen_recovers_log_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    {
        let db = Engine::open(dir.path(), small(WalMode::Sync)).unwrap();
        for i in 0..100u32 {
            db.put(format!("k{i:03}").as_bytes(), &value(i as u8, 8000), WriteOptions::default())
                .unwrap();
        }
        db.flush().unwrap();
        for i in 100..150u32 {
            db.put(format!("k{i:03}").as_bytes(), &value(i as u8, 20), WriteOptions::default())
                .unwrap();
        }
        db.delete(b"k007", WriteOptions::default()).unwrap();
        db.close().unwrap();
    }
    let db = Engine::open(dir.path(), small(WalMode::Sync)).unwrap();
    for i in 0..150u32 {
        let want = if i == 7 {
            None
        } else if i < 100 {
            Some(value(i as u8, 8000))
        } else {
            Some(value(i as u8, 20))
        };
        assert_eq!(db.get(format!("k{i:03}").as_bytes()).unwrap(), want, "k{i:03}");
    }
}

#[test]
fn overwrite_and_compaction_count_dead_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let db = Engine::open(dir.path(), small(WalMode::Async)).unwrap();
    for round in 0..3u8 {
        for i in 0..20u32 {
            db.put(format!("k{i:02}").as_bytes(), &value(round, 10_000), WriteOptions::default())
                .unwrap();
        }
        db.flush().unwrap();
    }
    db.compact().unwrap();
    let s = db.stats();
    assert!(s.get(Counter::BvalueDeadBytes) > 0);
    assert_eq!(s.get(Counter::BvalueReadsInCompaction), 0);
    for i in 0..20u32 {
        assert_eq!(db.get(format!("k{i:02}").as_bytes()).unwrap(), Some(value(2, 10_000)));
    }
    db.version().check_invariants().unwrap();
}

#[test]
fn memtable_absorbs_pointer_puts() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = Config::with_memtable_size(1024 * KIB);
    c.wal_mode = WalMode::Disabled;
    let db = Engine::open(dir.path(), c).unwrap();
    let v = value(1, 64 * 1024);
    let mut n = 0u64;
    while db.immutable_count() == 0 && db.stats().get(Counter::Flushes) == 0 {
        db.put(&n.to_be_bytes(), &v, WriteOptions::default()).unwrap();
        n += 1;
        assert!(n < 20_000);
    }
    assert!(n >= 15_000, "sealed after {n}");
}

#[test]
fn closed_engine_rejects_ops() {
    let dir = tempfile::tempdir().unwrap();
    let db = Engine::open(dir.path(), small(WalMode::Sync)).unwrap();
    db.close().unwrap();
    assert!(db.put(b"k", b"v", WriteOptions::default()).is_err());
    assert!(db.get(b"k").is_err());
}
