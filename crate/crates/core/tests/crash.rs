mod common;

use common::{crash_points, crash_trial};
use sepkv::WalMode;

fn run(mode: WalMode, n: usize, seed: u64) {
    let base = tempfile::tempdir().unwrap();
    let points = crash_points(base.path(), mode, n, seed).unwrap();
    let mut crashed = 0;
    for (i, (wseed, at, loss)) in points.into_iter().enumerate() {
        let dir = base.path().join(format!("trial-{i}"));
        let out = crash_trial(&dir, mode, wseed, at, loss)
            .unwrap_or_else(|e| panic!("trial {i} (seed {wseed}, hit {at}, {loss:?}): {e}"));
        if mode == WalMode::Sync {
            assert_eq!(out.lost, 0);
        }
        crashed += out.crashed as usize;
    }
    assert!(crashed > 0);
}

#[test]
fn sync_crashes_lose_nothing() {
    run(WalMode::Sync, 24, 11);
}

#[test]
fn async_crashes_recover_a_prefix() {
    run(WalMode::Async, 24, 12);
}

#[test]
fn disabled_crashes_recover_a_prefix() {
    run(WalMode::Disabled, 24, 13);
}
