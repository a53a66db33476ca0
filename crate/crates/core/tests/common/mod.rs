//! Harnesses shared by the integration suites: a reference-model runner and
//! a crash-injection runner.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sepkv::config::KIB;
use sepkv::fault::{FaultInjector, Faults, PowerLoss};
use sepkv::{Config, Engine, SeparationMode, WalMode, WriteOptions};

pub const MODES: [WalMode; 3] = [WalMode::Sync, WalMode::Async, WalMode::Disabled];
pub const SEPARATIONS: [SeparationMode; 2] = [SeparationMode::Separated, SeparationMode::Inline];

pub fn key(i: u32) -> Vec<u8> {
    format!("key-{i:06}").into_bytes()
}

/// Small sizes so flushes, compactions, lane rotation and cache eviction all
/// happen within a few thousand ops.
pub fn test_config(mode: WalMode, separation: SeparationMode) -> Config {
    let mut c = Config::with_memtable_size(96 * KIB);
    c.wal_mode = mode;
    c.separation = separation;
    c.l0_compaction_trigger = 3;
    c.l0_stop_writes_trigger = 8;
    c.level1_size_target = 256 * KIB as u64;
    c.target_file_size = 64 * KIB as u64;
    c.block_size = KIB;
    c.bvalue_lanes = 3;
    c.bvalue_file_rotate_size = 512 * KIB as u64;
    c.bvcache_capacity = 48 * KIB;
    c.async_flush_interval = Duration::from_millis(20);
    c
}

fn random_value(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let len = if rng.random_bool(0.3) {
        rng.random_range(4097..12_000)
    } else {
        rng.random_range(0..300)
    };
    let mut v = vec![0u8; len];
    rng.fill_bytes(&mut v);
    v
}

#[derive(Debug, Default)]
pub struct ModelStats {
    pub ops: u64,
    pub gets: u64,
    pub reopens: u64,
    pub flushes: u64,
    pub compactions: u64,
}

/// Drives the engine and a `BTreeMap` with the same random operations and
/// compares every read.
pub fn model_equivalence(
    dir: &Path,
    mode: WalMode,
    separation: SeparationMode,
    ops: u64,
    seed: u64,
) -> Result<ModelStats, String> {
    let config = test_config(mode, separation);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model: BTreeMap<Vec<u8>, Vec<u8>> = BTreeMap::new();
    let mut db = Engine::open(dir, config.clone()).map_err(|e| e.to_string())?;
    let mut stats = ModelStats::default();
    let keyspace = 1500;
    let opts = WriteOptions::default();
    for i in 0..ops {
        let k = key(rng.random_range(0..keyspace));
        let roll = rng.random_range(0..10_000);
        let fail = |what: &str, e: sepkv::Error| format!("op {i} {what}: {e}");
        match roll {
            0..=4_399 => {
                let v = random_value(&mut rng);
                db.put(&k, &v, opts).map_err(|e| fail("put", e))?;
                model.insert(k, v);
            }
            4_400..=5_599 => {
                db.delete(&k, opts).map_err(|e| fail("delete", e))?;
                model.remove(&k);
            }
            5_600..=9_949 => {
                stats.gets += 1;
                let got = db.get(&k).map_err(|e| fail("get", e))?;
                if got.as_ref() != model.get(&k) {
                    return Err(format!(
                        "op {i}: get {} returned {:?} bytes, model has {:?}",
                        String::from_utf8_lossy(&k),
                        got.map(|v| v.len()),
                        model.get(&k).map(|v| v.len())
                    ));
                }
            }
            9_950..=9_979 => {
                stats.flushes += 1;
                db.flush().map_err(|e| fail("flush", e))?;
            }
            9_980..=9_989 => {
                stats.compactions += 1;
                db.compact().map_err(|e| fail("compact", e))?;
            }
            _ => {
                stats.reopens += 1;
                if mode == WalMode::Disabled {
                    // Nothing logs the memtable in this mode.
                    db.flush().map_err(|e| fail("flush", e))?;
                }
                db.close().map_err(|e| fail("close", e))?;
                drop(db);
                db = Engine::open(dir, config.clone()).map_err(|e| fail("reopen", e))?;
            }
        }
        stats.ops += 1;
    }
    // Final sweep over every key, after one more reopen.
    if mode == WalMode::Disabled {
        db.flush().map_err(|e| e.to_string())?;
    }
    db.close().map_err(|e| e.to_string())?;
    drop(db);
    let db = Engine::open(dir, config).map_err(|e| e.to_string())?;
    for i in 0..keyspace {
        let k = key(i);
        let got = db.get(&k).map_err(|e| e.to_string())?;
        if got.as_ref() != model.get(&k) {
            return Err(format!("final sweep: key {i} differs from the model"));
        }
    }
    db.version().check_invariants()?;
    db.close().map_err(|e| e.to_string())?;
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum CrashOp {
    Put(Vec<u8>, Vec<u8>),
    Delete(Vec<u8>),
    Flush,
}

/// The op list a crash trial issues, fixed by `seed`.
fn crash_workload(seed: u64) -> Vec<CrashOp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..160)
        .map(|_| {
            let k = key(rng.random_range(0..40));
            match rng.random_range(0..100) {
                0..=79 => CrashOp::Put(k, random_value(&mut rng)),
                80..=95 => CrashOp::Delete(k),
                _ => CrashOp::Flush,
            }
        })
        .collect()
}

fn crash_config(mode: WalMode) -> Config {
    let mut c = test_config(mode, SeparationMode::Separated);
    c.memtable_size = 24 * KIB;
    c.l0_compaction_trigger = 2;
    c.level1_size_target = 48 * KIB as u64;
    c.target_file_size = 16 * KIB as u64;
    c.async_flush_interval = Duration::from_millis(2);
    c.async_buffer_limit = 4 * KIB;
    c
}

fn apply(model: &mut BTreeMap<Vec<u8>, Vec<u8>>, op: &CrashOp) {
    match op {
        CrashOp::Put(k, v) => {
            model.insert(k.clone(), v.clone());
        }
        CrashOp::Delete(k) => {
            model.remove(k);
        }
        CrashOp::Flush => {}
    }
}

#[derive(Debug, Clone)]
pub struct CrashOutcome {
    pub crashed: bool,
    pub point: Option<&'static str>,
    pub acked: usize,
    /// Acknowledged writes missing after recovery (always 0 in Sync mode).
    pub lost: usize,
}

/// Hits the workload for `seed` produces without a crash. Background timing
/// makes this approximate.
pub fn calibrate(dir: &Path, mode: WalMode, seed: u64) -> Result<u64, String> {
    let injector = FaultInjector::counting();
    let db = Engine::open_with_faults(dir, crash_config(mode), Faults::new(Some(injector.clone())))
        .map_err(|e| e.to_string())?;
    for op in crash_workload(seed) {
        let r = match &op {
            CrashOp::Put(k, v) => db.put(k, v, WriteOptions::default()),
            CrashOp::Delete(k) => db.delete(k, WriteOptions::default()),
            CrashOp::Flush => db.flush(),
        };
        r.map_err(|e| e.to_string())?;
    }
    db.close().map_err(|e| e.to_string())?;
    Ok(injector.hits())
}

/// Runs the seeded workload, crashes at hit `crash_at`, applies `loss`,
/// reopens and checks the recovered state.
///
/// Sync: every acknowledged write must be present. Async and Disabled: the
/// state must equal the model after some prefix of the acknowledged ops,
/// optionally plus the op that was in flight. Every read must succeed.
pub fn crash_trial(dir: &Path, mode: WalMode, seed: u64, crash_at: u64, loss: PowerLoss) -> Result<CrashOutcome, String> {
    let ops = crash_workload(seed);
    let injector = FaultInjector::crash_after(crash_at, seed);
    let config = crash_config(mode);
    let mut acked = 0;
    let mut in_flight = None;
    match Engine::open_with_faults(dir, config.clone(), Faults::new(Some(injector.clone()))) {
        Ok(db) => {
            for op in &ops {
                let r = match op {
                    CrashOp::Put(k, v) => db.put(k, v, WriteOptions::default()),
                    CrashOp::Delete(k) => db.delete(k, WriteOptions::default()),
                    CrashOp::Flush => db.flush(),
                };
                match r {
                    Ok(()) => acked += 1,
                    Err(e) if e.is_crash() || injector.crashed() => {
                        in_flight = Some(op.clone());
                        break;
                    }
                    Err(e) => return Err(format!("op {acked} failed without a crash: {e}")),
                }
            }
            if !injector.crashed() {
                // Crash point beyond the workload: die now, before close syncs.
                injector.force_crash();
            }
            drop(db);
        }
        Err(e) if e.is_crash() || injector.crashed() => {}
        Err(e) => return Err(format!("open failed without a crash: {e}")),
    }
    let point = injector.crash_point();
    injector
        .simulate_power_loss(loss)
        .map_err(|e| format!("power loss: {e}"))?;

    let db = Engine::open(dir, config).map_err(|e| format!("reopen after crash at {point:?}: {e}"))?;
    let mut recovered = BTreeMap::new();
    for i in 0..40 {
        let k = key(i);
        match db.get(&k) {
            Ok(Some(v)) => {
                recovered.insert(k, v);
            }
            Ok(None) => {}
            Err(e) => return Err(format!("corrupt read of key {i} after crash at {point:?}: {e}")),
        }
    }
    db.version().check_invariants()?;
    db.close().map_err(|e| e.to_string())?;

    let mut model = BTreeMap::new();
    let mut states = vec![model.clone()];
    for op in &ops[..acked] {
        apply(&mut model, op);
        states.push(model.clone());
    }
    let mut with_in_flight = model.clone();
    if let Some(op) = &in_flight {
        apply(&mut with_in_flight, op);
    }
    let lost = model
        .iter()
        .filter(|(k, v)| recovered.get(*k) != Some(*v) && recovered.get(*k) != with_in_flight.get(*k))
        .count();

    let outcome = CrashOutcome {
        crashed: point.is_some(),
        point,
        acked,
        lost,
    };
    if mode == WalMode::Sync {
        if recovered == model || recovered == with_in_flight {
            return Ok(outcome);
        }
        return Err(format!(
            "sync crash at {point:?} after {acked} acked ops: recovered state differs ({lost} keys lost)"
        ));
    }
    if recovered == with_in_flight || states.contains(&recovered) {
        return Ok(outcome);
    }
    Err(format!(
        "{mode:?} crash at {point:?} after {acked} acked ops: recovered state is not a prefix"
    ))
}

/// Picks `n` crash points for `mode`, spread over the calibrated hit count.
pub fn crash_points(base: &Path, mode: WalMode, n: usize, seed: u64) -> Result<Vec<(u64, u64, PowerLoss)>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut hits = Vec::new();
    for w in 0..4u64 {
        let dir = base.join(format!("calibrate-{w}"));
        hits.push(calibrate(&dir, mode, seed + w)?.max(1));
    }
    for i in 0..n {
        let w = (i % 4) as u64;
        let at = rng.random_range(1..=hits[w as usize]);
        let loss = match i % 3 {
            0 => PowerLoss::KeepUnsynced,
            1 => PowerLoss::DropUnsynced,
            _ => PowerLoss::TearUnsynced,
        };
        out.push((seed + w, at, loss));
    }
    Ok(out)
}
