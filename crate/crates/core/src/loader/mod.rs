//! Module loading under the four attachment strategies.
//!
//! | strategy | index | threads | hardware check | exclusion |
//! |----------|-------|---------|----------------|-----------|
//! | `stage0` | v0 | 1 | at load time | none needed |
//! | `stage1` | v1 | 1 | at registration | none needed |
//! | `stage2` | v0 | `workers`, each scanning every module | at load time | one global lock around `handle_module` |
//! | `stage3` | v0 | `workers - 1`, one range each | at load time | per-module atomic claim only |
//!
//! Every session produces a [`LoadState`] and a [`Trace`]. Events carry a
//! session-wide sequence number taken before a load is published, so sorting
//! by it yields a trace where each dependency's LOAD precedes its
//! dependents' even across threads.

mod audit;
mod partition;
mod state;
mod trace;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::catalog::{ModuleCatalog, ModuleRecord};
use crate::hardware::{DeviceMatcher, HardwareInventory};
use crate::registry::{IndexFile, IndexVersion};

pub use audit::{audit_trace, TraceAudit};
pub use partition::{plan_partitions, PartitionPlan};
pub use state::{LoadState, SlotState};
pub use trace::{parse_trace, EventKind, LoadEvent, Trace};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error("index does not fit this session: {0}")]
    IndexMismatch(String),
    #[error("{0}")]
    Config(String),
}

impl LoadError {
    pub fn code(&self) -> &'static str {
        match self {
            LoadError::IndexMismatch(_) => "index-mismatch",
            LoadError::Config(_) => "config",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Stage0,
    Stage1,
    Stage2,
    Stage3,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Stage0, Strategy::Stage1, Strategy::Stage2, Strategy::Stage3];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Stage0 => "stage0",
            Strategy::Stage1 => "stage1",
            Strategy::Stage2 => "stage2",
            Strategy::Stage3 => "stage3",
        }
    }

    /// Index format the strategy consumes.
    pub fn index_version(self) -> IndexVersion {
        match self {
            Strategy::Stage1 => IndexVersion::V1,
            _ => IndexVersion::V0,
        }
    }

    pub fn min_workers(self) -> usize {
        match self {
            Strategy::Stage0 | Strategy::Stage1 => 1,
            Strategy::Stage2 | Strategy::Stage3 => 2,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown strategy `{s}` (expected stage0..stage3)"))
    }
}

impl serde::Serialize for Strategy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

/// Simulated latency of attaching one module: `base_us + size_kb * per_kb_us`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadCost {
    pub base_us: u64,
    pub per_kb_us: u64,
}

impl LoadCost {
    /// Zero cost; sessions run as fast as the bookkeeping allows.
    pub const INSTANT: LoadCost = LoadCost { base_us: 0, per_kb_us: 0 };

    pub fn new(base_us: u64, per_kb_us: u64) -> Self {
        LoadCost { base_us, per_kb_us }
    }

    pub fn nominal_us(&self, module: &ModuleRecord) -> u64 {
        self.base_us + module.size_kb * self.per_kb_us
    }

    /// Cost of re-issuing a load for a module that is already present: the
    /// fixed per-call part, no linking.
    pub fn redundant_attempt_us(&self) -> u64 {
        self.base_us
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    pub workers: usize,
    pub cost: LoadCost,
}

impl StrategyConfig {
    pub fn new(strategy: Strategy, workers: usize, cost: LoadCost) -> Self {
        StrategyConfig { strategy, workers, cost }
    }

    pub fn validate(&self) -> Result<(), LoadError> {
        let min = self.strategy.min_workers();
        if self.workers < min {
            return Err(LoadError::Config(format!(
                "{} needs at least {min} worker(s), got {}",
                self.strategy, self.workers
            )));
        }
        Ok(())
    }
}

/// Result of one loading session.
#[derive(Debug)]
pub struct LoadOutcome {
    pub state: LoadState,
    pub trace: Trace,
    /// Whole session, setup included.
    pub elapsed_us: u64,
}

/// Sleeps (then briefly spins) for the module's nominal load latency and
/// returns the time actually spent. Zero-cost configs return immediately.
pub fn simulate_load(module: &ModuleRecord, cost: &LoadCost) -> u64 {
    spend(cost.nominal_us(module))
}

fn spend(us: u64) -> u64 {
    if us == 0 {
        return 0;
    }
    let start = Instant::now();
    let target = Duration::from_micros(us);
    // Sleep overshoots by tens of microseconds; finish the tail by yielding.
    let slack = Duration::from_micros(120);
    loop {
        let elapsed = start.elapsed();
        if elapsed >= target {
            return elapsed.as_micros() as u64;
        }
        let remaining = target - elapsed;
        if remaining > slack {
            thread::sleep(remaining - slack);
        } else {
            thread::yield_now();
        }
    }
}

/// Runs one session with the configured strategy.
pub fn load(
    catalog: &ModuleCatalog,
    index: &IndexFile,
    inventory: &HardwareInventory,
    config: &StrategyConfig,
) -> Result<LoadOutcome, LoadError> {
    config.validate()?;
    match config.strategy {
        Strategy::Stage0 => load_stage0(catalog, index, inventory, config.cost),
        Strategy::Stage1 => load_stage1(catalog, index, config.cost),
        Strategy::Stage2 => load_stage2(catalog, index, inventory, config.workers, config.cost),
        Strategy::Stage3 => load_stage3(catalog, index, inventory, config.workers, config.cost),
    }
}

/// Sequential depth-first loading over a v0 index.
pub fn load_stage0(
    catalog: &ModuleCatalog,
    index: &IndexFile,
    inventory: &HardwareInventory,
    cost: LoadCost,
) -> Result<LoadOutcome, LoadError> {
    let session = Session::new(catalog, cost);
    let flags = map_flags(catalog, index, 0..catalog.len())?;
    let matcher = DeviceMatcher::new(inventory);
    let mut log = WorkerLog::new(0);
    for pos in 0..catalog.len() {
        session.visit_root(&mut log, pos, flags[pos], &matcher, Session::handle_module_exclusive);
    }
    Ok(session.finish(vec![log]))
}

/// Sequential level sweep over a v1 index. No hardware check: registration
/// already folded it into the levels.
pub fn load_stage1(catalog: &ModuleCatalog, index: &IndexFile, cost: LoadCost) -> Result<LoadOutcome, LoadError> {
    check_index(catalog, index, IndexVersion::V1)?;
    let session = Session::new(catalog, cost);
    let values = index.values();
    let deepest = values.iter().copied().max().unwrap_or(0);
    let mut log = WorkerLog::new(0);
    for depth in 1..=deepest {
        for (pos, &v) in values.iter().enumerate() {
            if v != depth || catalog.record(pos).base_kernel_only {
                continue;
            }
            session.state.record_attempt(pos);
            session
                .state
                .try_claim(pos, log.worker)
                .expect("each position appears on exactly one level");
            session.complete_load(&mut log, pos);
        }
    }
    Ok(session.finish(vec![log]))
}

/// Parallel scan where every worker walks the whole module array and
/// `handle_module` runs under one global lock.
pub fn load_stage2(
    catalog: &ModuleCatalog,
    index: &IndexFile,
    inventory: &HardwareInventory,
    workers: usize,
    cost: LoadCost,
) -> Result<LoadOutcome, LoadError> {
    StrategyConfig::new(Strategy::Stage2, workers, cost).validate()?;
    let session = Session::new(catalog, cost);

    let (flags, matcher) = thread::scope(|s| {
        let mapper = s.spawn(|| map_flags(catalog, index, 0..catalog.len()));
        let reader = s.spawn(|| DeviceMatcher::new(inventory));
        (mapper.join().expect("index mapper panicked"), reader.join().expect("hardware reader panicked"))
    });
    let flags = flags?;

    let lock = Mutex::new(());
    let logs = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let (session, flags, matcher, lock) = (&session, &flags, &matcher, &lock);
                s.spawn(move || {
                    let mut log = WorkerLog::new(w);
                    for pos in 0..catalog.len() {
                        session.visit_root(&mut log, pos, flags[pos], matcher, |sess, log, pos| {
                            let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
                            sess.handle_module_exclusive(log, pos);
                        });
                    }
                    log
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("loader panicked")).collect()
    });
    Ok(session.finish(logs))
}

/// Lock-free partitioned loading: `workers - 1` threads each own a
/// contiguous range of roots; shared dependencies are arbitrated by the
/// per-module atomic claim.
pub fn load_stage3(
    catalog: &ModuleCatalog,
    index: &IndexFile,
    inventory: &HardwareInventory,
    workers: usize,
    cost: LoadCost,
) -> Result<LoadOutcome, LoadError> {
    let plan = plan_partitions(catalog.len(), workers)?;
    let session = Session::new(catalog, cost);

    // Setup: every loading thread maps its own slice of the index while the
    // remaining thread reads the hardware inventory.
    let (chunks, matcher) = thread::scope(|s| {
        let mappers: Vec<_> = plan
            .ranges
            .iter()
            .map(|r| {
                let r = r.clone();
                s.spawn(move || map_flags(catalog, index, r))
            })
            .collect();
        let reader = s.spawn(|| DeviceMatcher::new(inventory));
        let chunks: Vec<_> = mappers.into_iter().map(|h| h.join().expect("index mapper panicked")).collect();
        (chunks, reader.join().expect("hardware reader panicked"))
    });
    let flags: Vec<bool> = chunks.into_iter().collect::<Result<Vec<_>, _>>()?.concat();

    let logs = thread::scope(|s| {
        let handles: Vec<_> = plan
            .ranges
            .iter()
            .enumerate()
            .map(|(w, range)| {
                let (session, flags, matcher, range) = (&session, &flags, &matcher, range.clone());
                s.spawn(move || {
                    let mut log = WorkerLog::new(w);
                    for pos in range {
                        session.visit_root(&mut log, pos, flags[pos], matcher, Session::handle_module_shared);
                    }
                    log
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("loader panicked")).collect()
    });
    Ok(session.finish(logs))
}

fn check_index(catalog: &ModuleCatalog, index: &IndexFile, want: IndexVersion) -> Result<(), LoadError> {
    if index.version() != want {
        return Err(LoadError::IndexMismatch(format!(
            "strategy needs a {want} index, got {}",
            index.version()
        )));
    }
    if let Some(err) = index.misalignment(catalog) {
        return Err(LoadError::IndexMismatch(err.to_string()));
    }
    Ok(())
}

/// Load flags for `range`, checking the index version and that each entry
/// names the module at its catalog position.
fn map_flags(
    catalog: &ModuleCatalog,
    index: &IndexFile,
    range: std::ops::Range<usize>,
) -> Result<Vec<bool>, LoadError> {
    if index.version() != IndexVersion::V0 {
        return Err(LoadError::IndexMismatch(format!("strategy needs a v0 index, got {}", index.version())));
    }
    if index.len() != catalog.len() {
        return Err(LoadError::IndexMismatch(format!(
            "index has {} entries, catalog has {}",
            index.len(),
            catalog.len()
        )));
    }
    range
        .map(|pos| {
            let entry = &index.entries()[pos];
            let name = &catalog.record(pos).name;
            if &entry.name != name {
                return Err(LoadError::IndexMismatch(format!(
                    "position {pos}: index has `{}`, catalog has `{name}`",
                    entry.name
                )));
            }
            Ok(entry.value != 0)
        })
        .collect()
}

struct WorkerLog {
    worker: usize,
    events: Vec<(u64, LoadEvent)>,
}

impl WorkerLog {
    fn new(worker: usize) -> Self {
        WorkerLog { worker, events: Vec::new() }
    }
}

struct Session<'a> {
    catalog: &'a ModuleCatalog,
    cost: LoadCost,
    state: LoadState,
    clock: Instant,
    /// Session-wide event counter; orders the merged trace.
    sequence: AtomicU64,
}

impl<'a> Session<'a> {
    fn new(catalog: &'a ModuleCatalog, cost: LoadCost) -> Self {
        Session {
            catalog,
            cost,
            state: LoadState::new(catalog),
            clock: Instant::now(),
            sequence: AtomicU64::new(0),
        }
    }

    fn record(&self, log: &mut WorkerLog, kind: EventKind, pos: usize) {
        let seq = self.sequence.fetch_add(1, Ordering::AcqRel);
        let timestamp_us = self.clock.elapsed().as_micros() as u64;
        log.events.push((
            seq,
            LoadEvent {
                timestamp_us,
                worker: log.worker,
                kind,
                module: self.catalog.record(pos).name.clone(),
            },
        ));
    }

    /// Performs a load the caller has claimed. The LOAD event is recorded
    /// before the slot is published, so anyone who sees the module loaded
    /// also gets a later sequence number.
    fn complete_load(&self, log: &mut WorkerLog, pos: usize) {
        simulate_load(self.catalog.record(pos), &self.cost);
        self.record(log, EventKind::Load, pos);
        self.state.publish(pos, log.worker);
    }

    /// Root-level gate shared by stage0, stage2 and stage3.
    fn visit_root(
        &self,
        log: &mut WorkerLog,
        pos: usize,
        flagged: bool,
        matcher: &DeviceMatcher,
        handle: impl FnOnce(&Self, &mut WorkerLog, usize),
    ) {
        if !flagged {
            self.record(log, EventKind::SkipFlag, pos);
        } else if !matcher.supports(self.catalog.record(pos)) {
            self.record(log, EventKind::SkipHw, pos);
        } else {
            handle(self, log, pos);
        }
    }

    /// Depth-first `handle_module` for callers that have the table to
    /// themselves (single thread, or under the stage2 lock). A module that
    /// is already present still costs a redundant load attempt.
    fn handle_module_exclusive(&self, log: &mut WorkerLog, pos: usize) {
        match self.state.observe(pos) {
            SlotState::Unloaded => {}
            SlotState::Loaded { owner: None } => return,
            SlotState::Loaded { owner: Some(owner) } => {
                self.state.record_attempt(pos);
                if owner != log.worker {
                    self.record(log, EventKind::DupAttempt, pos);
                }
                spend(self.cost.redundant_attempt_us());
                return;
            }
            SlotState::Loading { owner } => unreachable!("load by worker {owner} in flight under exclusion"),
        }
        for &d in self.catalog.deps_of(pos) {
            self.handle_module_exclusive(log, d);
        }
        self.state.record_attempt(pos);
        self.state
            .try_claim(pos, log.worker)
            .expect("slot cannot be claimed concurrently under exclusion");
        self.complete_load(log, pos);
    }

    /// Lock-free `handle_module`: return early if the module is already
    /// present, otherwise load dependencies and race for the claim. Losing a
    /// race (or finding another worker's load) records DUP_ATTEMPT and waits
    /// for that load to finish.
    fn handle_module_shared(&self, log: &mut WorkerLog, pos: usize) {
        match self.state.observe(pos) {
            SlotState::Unloaded => {}
            SlotState::Loaded { owner } => {
                if owner.is_some_and(|o| o != log.worker) {
                    self.record(log, EventKind::DupAttempt, pos);
                }
                return;
            }
            SlotState::Loading { .. } => {
                self.record(log, EventKind::DupAttempt, pos);
                self.state.wait_loaded(pos);
                return;
            }
        }
        for &d in self.catalog.deps_of(pos) {
            self.handle_module_shared(log, d);
        }
        self.state.record_attempt(pos);
        match self.state.try_claim(pos, log.worker) {
            Ok(()) => self.complete_load(log, pos),
            Err(_) => {
                self.record(log, EventKind::DupAttempt, pos);
                self.state.wait_loaded(pos);
            }
        }
    }

    fn finish(self, logs: Vec<WorkerLog>) -> LoadOutcome {
        let mut events: Vec<(u64, LoadEvent)> = logs.into_iter().flat_map(|l| l.events).collect();
        events.sort_unstable_by_key(|(seq, _)| *seq);
        LoadOutcome {
            elapsed_us: self.clock.elapsed().as_micros() as u64,
            state: self.state,
            trace: Trace::new(events.into_iter().map(|(_, e)| e).collect()),
        }
    }
}
