//! Timing, space and benchmark summaries over loading sessions.

use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;

use crate::catalog::ModuleCatalog;
use crate::error::{Error, Result};
use crate::hardware::HardwareInventory;
use crate::loader::{self, EventKind, LoadCost, LoadState, Strategy, StrategyConfig, Trace};
use crate::registry::{self, Selection};

/// Loads per boot in the composite comparison.
pub const COMPOSITE_BOOTS: u64 = 4;
/// Reference improvement printed next to the measured composite.
pub const COMPOSITE_REFERENCE_PCT: f64 = 150.0;

/// Counters and wall time of one trace.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SessionTiming {
    pub first_load_us: u64,
    pub last_load_us: u64,
    /// `last_load_us - first_load_us`; 0 when nothing was loaded.
    pub wall_us: u64,
    pub loads: usize,
    pub skips_hw: usize,
    pub skips_flag: usize,
    pub dup_attempts: usize,
}

pub fn timing_from_trace(trace: &Trace) -> SessionTiming {
    let mut t = SessionTiming::default();
    let mut first = u64::MAX;
    for e in trace.events() {
        match e.kind {
            EventKind::Load => {
                t.loads += 1;
                first = first.min(e.timestamp_us);
                t.last_load_us = t.last_load_us.max(e.timestamp_us);
            }
            EventKind::SkipHw => t.skips_hw += 1,
            EventKind::SkipFlag => t.skips_flag += 1,
            EventKind::DupAttempt => t.dup_attempts += 1,
        }
    }
    if t.loads > 0 {
        t.first_load_us = first;
        t.wall_us = t.last_load_us - first;
    }
    t
}

/// Memory accounting for a finished session.
///
/// `total_kb = loaded_kb + saved_kb + base_only_kb` always holds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SpaceReport {
    pub total_kb: u64,
    pub loaded_kb: u64,
    pub saved_kb: u64,
    pub base_only_kb: u64,
}

impl SpaceReport {
    pub fn saved_pct(&self) -> f64 {
        if self.total_kb == 0 {
            0.0
        } else {
            100.0 * self.saved_kb as f64 / self.total_kb as f64
        }
    }
}

pub fn space_report(catalog: &ModuleCatalog, state: &LoadState) -> SpaceReport {
    let mut r = SpaceReport::default();
    for (i, m) in catalog.records().iter().enumerate() {
        r.total_kb += m.size_kb;
        if m.base_kernel_only {
            r.base_only_kb += m.size_kb;
        } else if state.is_dynamically_loaded(i) {
            r.loaded_kb += m.size_kb;
        }
    }
    r.saved_kb = r.total_kb - r.loaded_kb - r.base_only_kb;
    r
}

/// Mean topological level of the loadable modules.
pub fn mean_depth(catalog: &ModuleCatalog) -> f64 {
    let levels = catalog.levels();
    let (sum, n) = catalog
        .records()
        .iter()
        .zip(&levels)
        .filter(|(m, _)| !m.base_kernel_only)
        .fold((0u64, 0u64), |(s, n), (_, &l)| (s + u64::from(l), n + 1));
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

pub fn median(values: &mut [u64]) -> u64 {
    if values.is_empty() {
        return 0;
    }
    values.sort_unstable();
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub strategies: Vec<Strategy>,
    pub workers: usize,
    pub repetitions: usize,
    pub cost: LoadCost,
    pub composite: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            strategies: Strategy::ALL.to_vec(),
            workers: 4,
            repetitions: 5,
            cost: LoadCost::new(50, 2),
            composite: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyRow {
    pub strategy: Strategy,
    pub workers: usize,
    pub repetitions: usize,
    pub median_wall_us: u64,
    pub median_elapsed_us: u64,
    /// Median wall time divided by the stage0 median.
    pub normalized: f64,
    pub loads: usize,
    pub skips_hw: usize,
    pub skips_flag: usize,
    pub dup_attempts: usize,
    pub loaded_kb: u64,
    pub saved_kb: u64,
}

/// Registration plus four boots, depth-first vs. level sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompositeReport {
    pub register_v0_us: u64,
    pub register_v1_us: u64,
    pub boots_v0_us: u64,
    pub boots_v1_us: u64,
    pub total_v0_us: u64,
    pub total_v1_us: u64,
    /// `(total_v0 / total_v1 - 1) * 100`.
    pub improvement_pct: f64,
    pub mean_depth: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub modules: usize,
    pub cost: LoadCost,
    pub rows: Vec<StrategyRow>,
    /// Every run of every strategy loaded the same module set.
    pub loaded_sets_agree: bool,
    pub composite: Option<CompositeReport>,
}

impl BenchReport {
    pub fn row(&self, strategy: Strategy) -> Option<&StrategyRow> {
        self.rows.iter().find(|r| r.strategy == strategy)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "modules {}  cost base={}us per_kb={}us",
            self.modules, self.cost.base_us, self.cost.per_kb_us
        );
        let _ = writeln!(
            out,
            "{:<8} {:>7} {:>12} {:>12} {:>10} {:>6} {:>7} {:>9} {:>5}",
            "strategy", "workers", "wall_us", "elapsed_us", "normalized", "loads", "skip_hw", "skip_flag", "dup"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<8} {:>7} {:>12} {:>12} {:>10.3} {:>6} {:>7} {:>9} {:>5}",
                r.strategy.as_str(),
                r.workers,
                r.median_wall_us,
                r.median_elapsed_us,
                r.normalized,
                r.loads,
                r.skips_hw,
                r.skips_flag,
                r.dup_attempts
            );
        }
        let _ = writeln!(out, "loaded sets agree: {}", if self.loaded_sets_agree { "yes" } else { "NO" });
        if let Some(c) = &self.composite {
            let _ = writeln!(
                out,
                "composite (register + {COMPOSITE_BOOTS} boots, mean depth {:.2}): v0 {}us  v1 {}us  improvement {:.1}% (reference ~{COMPOSITE_REFERENCE_PCT:.0}%)",
                c.mean_depth, c.total_v0_us, c.total_v1_us, c.improvement_pct
            );
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::Trace(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Trace(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Runs every configured strategy `repetitions` times and summarizes medians.
/// stage0 is always included as the normalization baseline.
pub fn bench(
    catalog: &ModuleCatalog,
    selection: &Selection,
    inventory: &HardwareInventory,
    config: &BenchConfig,
) -> Result<BenchReport> {
    if config.repetitions == 0 {
        return Err(Error::Usage("repetitions must be at least 1".into()));
    }
    let mut strategies = vec![Strategy::Stage0];
    strategies.extend(config.strategies.iter().copied().filter(|&s| s != Strategy::Stage0));
    strategies.sort();
    strategies.dedup();

    let v0 = registry::register_v0_with(catalog, selection);
    let v1 = registry::register_v1_with(catalog, selection, inventory)?;

    let mut rows = Vec::new();
    let mut reference: Option<Vec<usize>> = None;
    let mut agree = true;
    for strategy in strategies {
        let workers = match strategy {
            Strategy::Stage0 | Strategy::Stage1 => 1,
            _ => config.workers,
        };
        let sc = StrategyConfig::new(strategy, workers, config.cost);
        let index = if strategy.index_version() == v1.version() { &v1 } else { &v0 };
        let mut walls = Vec::new();
        let mut elapsed = Vec::new();
        let mut last = None;
        for _ in 0..config.repetitions {
            let out = loader::load(catalog, index, inventory, &sc)?;
            let loaded = out.state.loaded_positions();
            match &reference {
                Some(r) => agree &= *r == loaded,
                None => reference = Some(loaded),
            }
            walls.push(timing_from_trace(&out.trace).wall_us);
            elapsed.push(out.elapsed_us);
            last = Some(out);
        }
        let last = last.expect("at least one repetition");
        let t = timing_from_trace(&last.trace);
        let space = space_report(catalog, &last.state);
        rows.push(StrategyRow {
            strategy,
            workers,
            repetitions: config.repetitions,
            median_wall_us: median(&mut walls),
            median_elapsed_us: median(&mut elapsed),
            normalized: 0.0,
            loads: t.loads,
            skips_hw: t.skips_hw,
            skips_flag: t.skips_flag,
            dup_attempts: t.dup_attempts,
            loaded_kb: space.loaded_kb,
            saved_kb: space.saved_kb,
        });
    }
    let base = rows[0].median_wall_us;
    for r in &mut rows {
        r.normalized = if r.strategy == Strategy::Stage0 {
            1.0
        } else if base == 0 {
            if r.median_wall_us == 0 { 1.0 } else { f64::INFINITY }
        } else {
            r.median_wall_us as f64 / base as f64
        };
    }

    let composite = if config.composite {
        Some(composite(catalog, selection, inventory, config.cost)?)
    } else {
        None
    };
    Ok(BenchReport { modules: catalog.len(), cost: config.cost, rows, loaded_sets_agree: agree, composite })
}

/// Times registration plus [`COMPOSITE_BOOTS`] sequential boots for both
/// index versions: v0 with depth-first loading, v1 with the level sweep.
pub fn composite(
    catalog: &ModuleCatalog,
    selection: &Selection,
    inventory: &HardwareInventory,
    cost: LoadCost,
) -> Result<CompositeReport> {
    let start = Instant::now();
    let v0 = registry::register_v0_with(catalog, selection);
    let register_v0_us = start.elapsed().as_micros() as u64;
    let start = Instant::now();
    let v1 = registry::register_v1_with(catalog, selection, inventory)?;
    let register_v1_us = start.elapsed().as_micros() as u64;

    let mut boots_v0_us = 0;
    let mut boots_v1_us = 0;
    for _ in 0..COMPOSITE_BOOTS {
        boots_v0_us += loader::load_stage0(catalog, &v0, inventory, cost)?.elapsed_us;
        boots_v1_us += loader::load_stage1(catalog, &v1, cost)?.elapsed_us;
    }
    let total_v0_us = register_v0_us + boots_v0_us;
    let total_v1_us = register_v1_us + boots_v1_us;
    let improvement_pct = if total_v1_us == 0 { 0.0 } else { (total_v0_us as f64 / total_v1_us as f64 - 1.0) * 100.0 };
    Ok(CompositeReport {
        register_v0_us,
        register_v1_us,
        boots_v0_us,
        boots_v1_us,
        total_v0_us,
        total_v1_us,
        improvement_pct,
        mean_depth: mean_depth(catalog),
    })
}
