use std::fs;
use std::process::Command;

use sepkv::bench::{self, KeyDist, Pattern, WorkloadSpec, YCSB_THETA};
use sepkv::{Counter, WalMode};

fn spec(pattern: Pattern) -> WorkloadSpec {
    WorkloadSpec {
        pattern,
        wal_mode: WalMode::Disabled,
        ops: Some(1000),
        value_size: 4096,
        memtable_size: 1 << 20,
        ..Default::default()
    }
}

#[test]
fn seqwrite_accounts_user_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let r = bench::run(&spec(Pattern::SequentialWrite), dir.path(), false).unwrap();
    assert_eq!(r.puts, 1000);
    assert!(r.ops_per_sec() > 0.0);
    assert_eq!(r.metrics.get(Counter::UserBytesIn), 1000 * (16 + 4096));
}

#[test]
fn same_seed_same_stream_and_contents() {
    for pattern in [Pattern::RandomWrite, Pattern::MixedYcsbA] {
        let mut s = spec(pattern);
        if pattern == Pattern::MixedYcsbA {
            s.distribution = KeyDist::Zipfian { theta: YCSB_THETA };
            s.preload = 300;
        }
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ra = bench::run(&s, a.path(), false).unwrap();
        let rb = bench::run(&s, b.path(), false).unwrap();
        assert!(ra.op_digest.is_some());
        assert_eq!(ra.op_digest, rb.op_digest);
        assert_eq!(ra.content_digest, rb.content_digest);
        s.seed += 1;
        let c = tempfile::tempdir().unwrap();
        let rc = bench::run(&s, c.path(), false).unwrap();
        assert_ne!(ra.op_digest, rc.op_digest);
    }
}

#[test]
fn ycsb_mixes_reads_and_updates() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = spec(Pattern::MixedYcsbA);
    s.distribution = KeyDist::Zipfian { theta: YCSB_THETA };
    s.preload = 200;
    let r = bench::run(&s, dir.path(), false).unwrap();
    assert_eq!(r.puts + r.gets, 1000);
    assert!(r.gets > 400 && r.puts > 400);
    assert_eq!(r.misses, 0);
}

#[test]
fn refuses_a_dirty_directory() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("junk"), b"x").unwrap();
    assert!(bench::run(&spec(Pattern::SequentialWrite), dir.path(), false).is_err());
}

#[test]
fn report_files_agree_with_counters() {
    let dir = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let r = bench::run(&spec(Pattern::RandomWrite), dir.path(), false).unwrap();
    r.write_to(out.path()).unwrap();
    let csv = fs::read_to_string(out.path().join("intervals.csv")).unwrap();
    assert!(csv.starts_with("bucket_start_s,instant_mb_s,cumavg_mb_s,ops_s\n"));
    let bytes: u64 = r.intervals.iter().map(|p| p.bytes).sum();
    assert_eq!(bytes, r.metrics.get(Counter::UserBytesIn));
    let metrics = fs::read_to_string(out.path().join("metrics.txt")).unwrap();
    assert!(metrics.lines().all(|l| l.split_once('=').is_some()));
    let summary = fs::read_to_string(out.path().join("summary.txt")).unwrap();
    assert!(summary.contains("pattern=randwrite"));
}

#[test]
fn compare_lanes_rows_are_balanced() {
    let dir = tempfile::tempdir().unwrap();
    let rows = bench::compare_lanes(dir.path(), 64 * 1024, &[1, 2, 4, 8], 8 << 20).unwrap();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!(r.lane_records.len(), r.lanes);
        assert!(r.imbalance() <= 1, "{r:?}");
        assert!(r.mb_per_sec > 0.0);
    }
    assert!(bench::compare_lanes(dir.path(), 64 * 1024, &[], 1 << 20).is_err());
}

#[test]
fn cli_run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report");
    let status = Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(["run", "--pattern", "seqwrite", "--wal", "off", "--ops", "200", "--value-size", "8192"])
        .args(["--mode", "separated", "--lanes", "2", "--seed", "3", "--interval-ms", "50"])
        .arg("--dir")
        .arg(dir.path().join("data"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    for f in ["summary.txt", "intervals.csv", "metrics.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let lanes = Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(["compare-lanes", "--value-size", "65536", "--lanes", "1,2", "--bytes", "2097152", "--dir"])
        .arg(dir.path().join("lanes"))
        .output()
        .unwrap();
    assert!(lanes.status.success());
    assert!(String::from_utf8_lossy(&lanes.stdout).starts_with("lanes,mb_per_s"));
}

#[test]
fn separated_outpaces_inline_on_big_values() {
    let run = |separation| {
        let dir = tempfile::tempdir().unwrap();
        let s = WorkloadSpec {
            pattern: Pattern::RandomWrite,
            wal_mode: WalMode::Async,
            value_size: 64 * 1024,
            total_bytes: Some(48 << 20),
            memtable_size: 4 << 20,
            separation,
            content_digest: false,
            ..Default::default()
        };
        bench::run(&s, dir.path(), false).unwrap().mb_per_sec()
    };
    let sep = run(sepkv::SeparationMode::Separated);
    let inline = run(sepkv::SeparationMode::Inline);
    assert!(sep >= inline, "separated {sep:.1} MB/s < inline {inline:.1} MB/s");
}
