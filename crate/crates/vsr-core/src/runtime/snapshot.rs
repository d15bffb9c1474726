//! Atomic weight-snapshot handover between the configuration flow and the
//! pixel flow.

use std::sync::{Arc, Condvar, Mutex};

use crate::error::{Error, Result};
use crate::net::ProcessWeights;

struct CellState {
    snap: Option<Arc<ProcessWeights>>,
    poisoned: bool,
}

/// A single publication cell with atomic-replacement semantics: a reader
/// sees either the previous complete snapshot or the new complete snapshot,
/// never a mixture, and generations strictly increase.
pub struct SnapshotCell {
    state: Mutex<CellState>,
    cond: Condvar,
}

impl Default for SnapshotCell {
    fn default() -> Self {
        Self::new()
    }
}

impl SnapshotCell {
    pub fn new() -> Self {
        SnapshotCell {
            state: Mutex::new(CellState {
                snap: None,
                poisoned: false,
            }),
            cond: Condvar::new(),
        }
    }

    /// Replace the current snapshot. Rejects non-monotone generations and
    /// torn snapshots.
    pub fn publish(&self, weights: Arc<ProcessWeights>) -> Result<()> {
        if !weights.verify() {
            return Err(Error::contract(
                "publish: snapshot failed its integrity check",
            ));
        }
        let mut state = self.state.lock().unwrap();
        if state.poisoned {
            return Err(Error::contract("publish: snapshot cell is poisoned"));
        }
        if let Some(current) = &state.snap {
            if weights.generation() <= current.generation() {
                return Err(Error::contract(format!(
                    "publish: generation {} is not above current {}",
                    weights.generation(),
                    current.generation()
                )));
            }
        }
        state.snap = Some(weights);
        self.cond.notify_all();
        Ok(())
    }

    pub fn current(&self) -> Option<Arc<ProcessWeights>> {
        self.state.lock().unwrap().snap.clone()
    }

    /// Block until a snapshot with generation >= `generation` is published.
    pub fn wait_min_generation(&self, generation: u64) -> Result<Arc<ProcessWeights>> {
        let mut state = self.state.lock().unwrap();
        loop {
            if state.poisoned {
                return Err(Error::contract(
                    "configuration flow failed; snapshot cell poisoned",
                ));
            }
            if let Some(snap) = &state.snap {
                if snap.generation() >= generation {
                    return Ok(snap.clone());
                }
            }
            state = self.cond.wait(state).unwrap();
        }
    }

    /// Wake every waiter with an error; used when the configuration flow
    /// dies so the pixel flow cannot deadlock.
    pub fn poison(&self) {
        self.state.lock().unwrap().poisoned = true;
        self.cond.notify_all();
    }
}
