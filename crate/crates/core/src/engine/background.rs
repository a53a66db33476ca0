//! Flush, compaction and periodic sync threads.

use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::Inner;

const POLL: Duration = Duration::from_millis(50);

pub(super) fn spawn(inner: &Arc<Inner>) -> Vec<JoinHandle<()>> {
    let mut threads = Vec::new();
    let i = inner.clone();
    threads.push(
        thread::Builder::new()
            .name("flush".into())
            .spawn(move || flush_loop(&i))
            .expect("spawn flush thread"),
    );
    let i = inner.clone();
    threads.push(
        thread::Builder::new()
            .name("compact".into())
            .spawn(move || compact_loop(&i))
            .expect("spawn compaction thread"),
    );
    let i = inner.clone();
    threads.push(
        thread::Builder::new()
            .name("syncer".into())
            .spawn(move || sync_loop(&i))
            .expect("spawn sync thread"),
    );
    threads
}

fn flush_loop(inner: &Inner) {
    let stop = inner.config.l0_stop_writes_trigger;
    loop {
        {
            let mut bg = inner.bg.lock();
            loop {
                if bg.shutdown || bg.error.is_some() {
                    return;
                }
                let queued = !inner.mem.read().immutable.is_empty();
                // Too many L0 tables: let compaction catch up first.
                if queued && inner.vset.current().level(0).len() < stop {
                    break;
                }
                inner.bg_cv.wait_for(&mut bg, POLL);
            }
        }
        if let Err(e) = inner.flush_oldest() {
            inner.fail(e);
            return;
        }
    }
}

fn compact_loop(inner: &Inner) {
    loop {
        {
            let mut bg = inner.bg.lock();
            if bg.shutdown || bg.error.is_some() {
                return;
            }
            if !bg.compact_pending {
                inner.bg_cv.wait_for(&mut bg, POLL * 2);
            }
            bg.compact_pending = false;
            if bg.shutdown {
                return;
            }
        }
        loop {
            match inner.compact_step(false) {
                Ok(true) => {
                    if inner.bg.lock().shutdown {
                        return;
                    }
                }
                Ok(false) => break,
                Err(e) => {
                    inner.fail(e);
                    return;
                }
            }
        }
    }
}

fn sync_loop(inner: &Inner) {
    let every = inner.config.async_flush_interval;
    loop {
        {
            let mut bg = inner.bg.lock();
            if bg.shutdown || bg.error.is_some() {
                return;
            }
            // Other notifications must not shorten the period.
            let deadline = Instant::now() + every;
            while !bg.shutdown && Instant::now() < deadline {
                inner.bg_cv.wait_until(&mut bg, deadline);
            }
            if bg.shutdown {
                return;
            }
        }
        let r = inner.bv.sync_all().and_then(|()| inner.wal.drain());
        if let Err(e) = r {
            inner.fail(e);
            return;
        }
    }
}
