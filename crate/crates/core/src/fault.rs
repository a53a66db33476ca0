//! Crash injection for durability testing.
//!
//! Every durable step of the write pipeline calls [`Faults::hit`] with a
//! named point. An armed injector fails the n-th hit with
//! [`Error::Crashed`]; from then on every hit fails, so foreground and
//! background work both stop as if the process had died. Writes at the
//! crash point may land partially (a torn write), and the injector keeps
//! the last synced length of each file so a harness can also discard
//! unsynced bytes to model power loss.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::Mutex;

use crate::error::{Error, Result};

/// What happens to bytes that were written but never synced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerLoss {
    /// Process crash only: the page cache survives.
    KeepUnsynced,
    /// Every file is cut back to its last synced length.
    DropUnsynced,
    /// Every file is cut to a random length between synced and written.
    TearUnsynced,
}

#[derive(Debug)]
pub struct FaultInjector {
    crash_at: u64,
    hits: AtomicU64,
    crashed: AtomicBool,
    crash_point: Mutex<Option<&'static str>>,
    rng: AtomicU64,
    synced: Mutex<HashMap<PathBuf, u64>>,
}

impl FaultInjector {
    /// Counts hits without ever crashing.
    pub fn counting() -> Arc<Self> {
        Self::crash_after(u64::MAX, 0)
    }

    /// Crashes on the `n`-th hit (1-based).
    pub fn crash_after(n: u64, seed: u64) -> Arc<Self> {
        Arc::new(FaultInjector {
            crash_at: n,
            hits: AtomicU64::new(0),
            crashed: AtomicBool::new(false),
            crash_point: Mutex::new(None),
            rng: AtomicU64::new(seed | 1),
            synced: Mutex::new(HashMap::new()),
        })
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn crashed(&self) -> bool {
        self.crashed.load(Ordering::SeqCst)
    }

    pub fn crash_point(&self) -> Option<&'static str> {
        *self.crash_point.lock()
    }

    /// Enters the crashed state now, as if the next hit had been the chosen one.
    pub fn force_crash(&self) {
        let mut point = self.crash_point.lock();
        if !self.crashed() {
            *point = Some("forced");
            self.crashed.store(true, Ordering::SeqCst);
        }
    }

    fn next_random(&self) -> u64 {
        // xorshift64*; only needs to be cheap and reproducible per seed.
        let mut x = self.rng.load(Ordering::Relaxed);
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.rng.store(x, Ordering::Relaxed);
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    fn hit(&self, point: &'static str) -> Result<()> {
        if self.crashed() {
            return Err(Error::Crashed(point));
        }
        let n = self.hits.fetch_add(1, Ordering::SeqCst) + 1;
        if n == self.crash_at {
            *self.crash_point.lock() = Some(point);
            self.crashed.store(true, Ordering::SeqCst);
            return Err(Error::Crashed(point));
        }
        Ok(())
    }

    fn note_synced(&self, path: &Path, len: u64) {
        self.synced.lock().insert(path.to_path_buf(), len);
    }

    /// Whatever a file holds when first seen is treated as durable.
    fn note_created(&self, path: &Path) {
        let len = std::fs::metadata(path).map_or(0, |m| m.len());
        self.synced.lock().entry(path.to_path_buf()).or_insert(len);
    }

    /// Applies the chosen power-loss model to every tracked file.
    pub fn simulate_power_loss(&self, mode: PowerLoss) -> io::Result<()> {
        if mode == PowerLoss::KeepUnsynced {
            return Ok(());
        }
        let synced = self.synced.lock().clone();
        for (path, synced_len) in synced {
            let Ok(meta) = std::fs::metadata(&path) else {
                continue;
            };
            let len = meta.len();
            if len <= synced_len {
                continue;
            }
            let keep = match mode {
                PowerLoss::DropUnsynced => synced_len,
                _ => synced_len + self.next_random() % (len - synced_len + 1),
            };
            OpenOptions::new().write(true).open(&path)?.set_len(keep)?;
        }
        Ok(())
    }
}

/// Optional injector handle threaded through every component.
#[derive(Debug, Clone, Default)]
pub struct Faults(Option<Arc<FaultInjector>>);

impl Faults {
    pub fn none() -> Self {
        Faults(None)
    }

    pub fn new(injector: Option<Arc<FaultInjector>>) -> Self {
        Faults(injector)
    }

    #[inline]
    pub fn hit(&self, point: &'static str) -> Result<()> {
        match &self.0 {
            Some(f) => f.hit(point),
            None => Ok(()),
        }
    }

    pub fn crashed(&self) -> bool {
        self.0.as_ref().is_some_and(|f| f.crashed())
    }

    /// Appends `buf`; a crash on this step may leave a torn prefix behind.
    pub fn write(&self, file: &mut File, buf: &[u8], point: &'static str) -> Result<()> {
        if let Some(f) = &self.0 {
            if let Err(e) = f.hit(point) {
                if !buf.is_empty() && f.crash_point() == Some(point) {
                    let torn = (f.next_random() % buf.len() as u64) as usize;
                    let _ = file.write_all(&buf[..torn]);
                }
                return Err(e);
            }
        }
        file.write_all(buf)?;
        Ok(())
    }

    /// Syncs file data, then records `len` as the durable length of `path`.
    pub fn sync(&self, file: &File, path: &Path, len: u64, point: &'static str) -> Result<()> {
        self.hit(point)?;
        file.sync_data()?;
        if let Some(f) = &self.0 {
            f.note_synced(path, len);
        }
        Ok(())
    }

    pub fn created(&self, path: &Path) {
        if let Some(f) = &self.0 {
            f.note_created(path);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crashes_exactly_once_then_stays_down() {
        let f = Faults::new(Some(FaultInjector::crash_after(3, 1)));
        assert!(f.hit("a").is_ok());
        assert!(f.hit("b").is_ok());
        assert!(matches!(f.hit("c"), Err(Error::Crashed("c"))));
        assert!(f.crashed());
        assert!(f.hit("d").is_err());
    }

    #[test]
    fn power_loss_truncates_to_synced_length() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f");
        let inj = FaultInjector::counting();
        let faults = Faults::new(Some(inj.clone()));
        let mut file = File::create(&path).unwrap();
        faults.created(&path);
        faults.write(&mut file, b"hello", "w").unwrap();
        faults.sync(&file, &path, 5, "s").unwrap();
        faults.write(&mut file, b" world", "w").unwrap();
        inj.simulate_power_loss(PowerLoss::DropUnsynced).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"hello");
    }
}
