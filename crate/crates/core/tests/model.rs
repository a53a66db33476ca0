mod common;

use common::{model_equivalence, MODES, SEPARATIONS};

#[test]
fn engine_matches_ordered_map() {
    for (i, mode) in MODES.into_iter().enumerate() {
        for (j, sep) in SEPARATIONS.into_iter().enumerate() {
            let dir = tempfile::tempdir().unwrap();
            let stats = model_equivalence(dir.path(), mode, sep, 8_000, (i * 2 + j) as u64)
                .unwrap_or_else(|e| panic!("{mode:?}/{sep:?}: {e}"));
            assert!(stats.reopens > 0 && stats.flushes > 0, "{stats:?}");
        }
    }
}
