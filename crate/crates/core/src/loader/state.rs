use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use crate::catalog::ModuleCatalog;

use super::trace::{EventKind, Trace};

// Slot word layout: 0 = unloaded; otherwise `owner_tag << 1 | loaded_bit`,
// where owner_tag is worker + 1, or BASE_TAG for base-kernel modules.
const UNLOADED: u64 = 0;
const LOADED_BIT: u64 = 1;
const BASE_TAG: u64 = u32::MAX as u64;

/// Observed status of one module slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotState {
    Unloaded,
    /// Claimed by `owner`, load still in progress.
    Loading { owner: usize },
    /// Present. `owner` is `None` for modules that are part of the base kernel.
    Loaded { owner: Option<usize> },
}

/// Per-module load table shared by all workers of a session.
///
/// Each slot moves `Unloaded -> Loading -> Loaded` at most once. The first
/// step is a single compare-and-swap, so exactly one worker can own a load.
#[derive(Debug)]
pub struct LoadState {
    slots: Vec<AtomicU64>,
    attempts: Vec<AtomicU32>,
}

impl LoadState {
    /// Fresh table; base-kernel modules start out loaded.
    pub fn new(catalog: &ModuleCatalog) -> Self {
        LoadState {
            slots: catalog
                .records()
                .iter()
                .map(|r| AtomicU64::new(if r.base_kernel_only { BASE_TAG << 1 | LOADED_BIT } else { UNLOADED }))
                .collect(),
            attempts: (0..catalog.len()).map(|_| AtomicU32::new(0)).collect(),
        }
    }

    /// Reconstructs the final table of a recorded session from its LOAD
    /// events. Attempt counters equal the number of LOAD events seen.
    pub fn from_trace(catalog: &ModuleCatalog, trace: &Trace) -> Result<Self, String> {
        let state = LoadState::new(catalog);
        for e in trace.events().iter().filter(|e| e.kind == EventKind::Load) {
            let pos = catalog
                .position(&e.module)
                .ok_or_else(|| format!("trace loads `{}`, which is not in the catalog", e.module))?;
            state.record_attempt(pos);
            state
                .try_claim(pos, e.worker)
                .map_err(|_| format!("trace loads `{}` more than once", e.module))?;
            state.publish(pos, e.worker);
        }
        Ok(state)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn observe(&self, position: usize) -> SlotState {
        decode(self.slots[position].load(Ordering::Acquire))
    }

    pub fn is_loaded(&self, position: usize) -> bool {
        matches!(self.observe(position), SlotState::Loaded { .. })
    }

    /// Loaded by a worker during the session (base-kernel modules excluded).
    pub fn is_dynamically_loaded(&self, position: usize) -> bool {
        matches!(self.observe(position), SlotState::Loaded { owner: Some(_) })
    }

    pub fn attempts(&self, position: usize) -> u32 {
        self.attempts[position].load(Ordering::Relaxed)
    }

    /// Positions loaded during the session, ascending.
    pub fn loaded_positions(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_dynamically_loaded(i)).collect()
    }

    pub fn record_attempt(&self, position: usize) {
        self.attempts[position].fetch_add(1, Ordering::Relaxed);
    }

    /// Atomically claims an unloaded slot for `worker`. On failure returns
    /// what the slot held instead.
    pub fn try_claim(&self, position: usize, worker: usize) -> Result<(), SlotState> {
        self.slots[position]
            .compare_exchange(UNLOADED, owner_tag(worker) << 1, Ordering::AcqRel, Ordering::Acquire)
            .map(|_| ())
            .map_err(decode)
    }

    /// Marks a slot claimed by `worker` as loaded.
    pub fn publish(&self, position: usize, worker: usize) {
        let prev = self.slots[position].swap(owner_tag(worker) << 1 | LOADED_BIT, Ordering::Release);
        debug_assert_eq!(prev, owner_tag(worker) << 1, "publish without claim");
    }

    /// Blocks until the slot is loaded: yields first, then naps.
    pub fn wait_loaded(&self, position: usize) {
        let mut spins = 0u32;
        while !self.is_loaded(position) {
            if spins < 64 {
                spins += 1;
                std::thread::yield_now();
            } else {
                std::thread::sleep(std::time::Duration::from_micros(20));
            }
        }
    }
}

fn owner_tag(worker: usize) -> u64 {
    let tag = worker as u64 + 1;
    assert!(tag < BASE_TAG, "worker id out of range");
    tag
}

fn decode(word: u64) -> SlotState {
    if word == UNLOADED {
        return SlotState::Unloaded;
    }
    let tag = word >> 1;
    let owner = (tag != BASE_TAG).then(|| (tag - 1) as usize);
    if word & LOADED_BIT == 0 {
        SlotState::Loading { owner: owner.expect("base modules are never claimed") }
    } else {
        SlotState::Loaded { owner }
    }
}
