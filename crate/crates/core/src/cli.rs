//! Command-line driver: `gen`, `register`, `load`, `bench`, `report`.
//!
//! Failures print one `error: <code>: <detail>` line on stderr and exit nonzero.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::catalog::{parse_catalog, ModuleCatalog};
use crate::error::{Error, Result};
use crate::fixture::{generate, FixtureSpec};
use crate::hardware::{parse_inventory, HardwareInventory};
use crate::loader::{self, parse_trace, LoadCost, LoadState, Strategy, StrategyConfig, Trace};
use crate::metrics::{self, BenchConfig};
use crate::registry::{self, parse_selection_list, read_index, write_index, IndexVersion, Selection, SelectionPolicy};

#[derive(Debug, Parser)]
#[command(name = "modattach", about = "Staged kernel-module registration and loading simulator", disable_version_flag = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic catalog and inventory.
    Gen(GenArgs),
    /// Build an index file from a catalog and a selection policy.
    Register(RegisterArgs),
    /// Run one loading session and write its trace.
    Load(LoadArgs),
    /// Compare strategies on identical inputs.
    Bench(BenchArgs),
    /// Summarize a recorded trace.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub modules: usize,
    #[arg(long, default_value_t = 4)]
    pub max_depth: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.8)]
    pub hw_coverage: f64,
    /// Output catalog path.
    #[arg(long)]
    pub catalog: PathBuf,
    /// Output inventory path.
    #[arg(long)]
    pub inventory: PathBuf,
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    /// all-load | all-skip | file:PATH | interactive
    #[arg(long, conflicts_with_all = ["interactive", "assume_yes"])]
    pub policy: Option<String>,
    /// Ask `load <module>? [y/n]` on stdin for each module.
    #[arg(long, conflicts_with = "assume_yes")]
    pub interactive: bool,
    /// Same as `--policy all-load`.
    #[arg(long)]
    pub assume_yes: bool,
}

impl PolicyArgs {
    fn resolve(&self) -> Result<SelectionPolicy> {
        if self.interactive {
            return Ok(SelectionPolicy::Interactive);
        }
        if self.assume_yes {
            return Ok(SelectionPolicy::AllLoad);
        }
        parse_policy(self.policy.as_deref().unwrap_or("all-load"))
    }
}

pub fn parse_policy(s: &str) -> Result<SelectionPolicy> {
    match s {
        "all-load" => Ok(SelectionPolicy::AllLoad),
        "all-skip" => Ok(SelectionPolicy::AllSkip),
        "interactive" => Ok(SelectionPolicy::Interactive),
        _ => match s.strip_prefix("file:") {
            Some(path) => Ok(SelectionPolicy::FromFile(parse_selection_list(&read(Path::new(path))?))),
            None => Err(Error::Usage(format!("unknown policy `{s}` (all-load, all-skip, file:PATH, interactive)"))),
        },
    }
}

#[derive(Debug, Args)]
pub struct CostArgs {
    #[arg(long, default_value_t = 0)]
    pub load_base_us: u64,
    #[arg(long, default_value_t = 0)]
    pub load_per_kb_us: u64,
}

impl CostArgs {
    fn cost(&self) -> LoadCost {
        LoadCost::new(self.load_base_us, self.load_per_kb_us)
    }
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    #[arg(long)]
    pub catalog: PathBuf,
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// Index format: v0 (load bits) or v1 (dependency levels).
    #[arg(long, default_value = "v0")]
    pub version: IndexVersion,
    /// Required for v1.
    #[arg(long)]
    pub inventory: Option<PathBuf>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub index: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LoadArgs {
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long)]
    pub index: PathBuf,
    /// Not consulted by stage1.
    #[arg(long)]
    pub inventory: Option<PathBuf>,
    #[arg(long)]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Trace output path; stdout when omitted.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub cost: CostArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub catalog: PathBuf,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[arg(long)]
    pub inventory: Option<PathBuf>,
    /// Comma-separated strategies; stage0 is always included as baseline.
    #[arg(long, value_delimiter = ',', default_value = "stage0,stage1,stage2,stage3")]
    pub strategy: Vec<Strategy>,
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(flatten)]
    pub cost: CostArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

/// Parses `std::env::args` and runs; used by the binary.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let detail = e.to_string();
            let first = detail.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: usage: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if e.code() == "prompt" {
                // A prompt may still be waiting on the current line.
                eprintln!();
            }
            eprintln!("error: {}: {e}", e.code());
            ExitCode::from(if e.code() == "usage" { 2 } else { 1 })
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Register(a) => cmd_register(&a),
        Command::Load(a) => cmd_load(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write(p, text),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn load_catalog(path: &Path) -> Result<ModuleCatalog> {
    Ok(parse_catalog(&read(path)?)?)
}

fn load_inventory(path: Option<&Path>) -> Result<HardwareInventory> {
    match path {
        Some(p) => Ok(parse_inventory(&read(p)?)?),
        None => Ok(HardwareInventory::default()),
    }
}

pub fn cmd_gen(a: &GenArgs) -> Result<()> {
    let f = generate(FixtureSpec::new(a.modules, a.max_depth, a.seed, a.hw_coverage))?;
    write(&a.catalog, &f.catalog_text)?;
    write(&a.inventory, &f.inventory_text)
}

pub fn cmd_register(a: &RegisterArgs) -> Result<()> {
    if a.version == IndexVersion::V1 && a.inventory.is_none() {
        return Err(Error::Usage("--version v1 requires --inventory".into()));
    }
    let catalog = load_catalog(&a.catalog)?;
    let inventory = load_inventory(a.inventory.as_deref())?;
    let selection = Selection::resolve(&a.policy.resolve()?, &catalog)?;
    let index = match a.version {
        IndexVersion::V0 => registry::register_v0_with(&catalog, &selection),
        IndexVersion::V1 => registry::register_v1_with(&catalog, &selection, &inventory)?,
    };
    emit(a.index.as_deref(), &write_index(&index))
}

pub fn cmd_load(a: &LoadArgs) -> Result<()> {
    let config = StrategyConfig::new(a.strategy, a.workers, a.cost.cost());
    let outcome = config
        .validate()
        .map_err(|e| Error::Usage(e.to_string()))
        .and_then(|()| {
            let catalog = load_catalog(&a.catalog)?;
            let index = read_index(&read(&a.index)?, &catalog)?;
            let inventory = load_inventory(a.inventory.as_deref())?;
            Ok(loader::load(&catalog, &index, &inventory, &config)?)
        });
    // The trace file exists afterwards whether or not the session ran.
    let trace = outcome.as_ref().map(|o| o.trace.to_text()).unwrap_or_default();
    if a.trace.is_some() || outcome.is_ok() {
        emit(a.trace.as_deref(), &trace)?;
    }
    let outcome = outcome?;
    if a.trace.is_some() {
        let t = metrics::timing_from_trace(&outcome.trace);
        println!(
            "{}: loads {} skip_hw {} skip_flag {} dup {} wall_us {} elapsed_us {}",
            a.strategy, t.loads, t.skips_hw, t.skips_flag, t.dup_attempts, t.wall_us, outcome.elapsed_us
        );
    }
    Ok(())
}

pub fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let catalog = load_catalog(&a.catalog)?;
    let inventory = load_inventory(a.inventory.as_deref())?;
    let selection = Selection::resolve(&a.policy.resolve()?, &catalog)?;
    let config = BenchConfig {
        strategies: a.strategy.clone(),
        workers: a.workers,
        repetitions: a.reps,
        cost: a.cost.cost(),
        composite: a.format == Format::Text,
    };
    for &s in &config.strategies {
        let workers = if matches!(s, Strategy::Stage2 | Strategy::Stage3) { a.workers } else { 1 };
        StrategyConfig::new(s, workers, config.cost)
            .validate()
            .map_err(|e| Error::Usage(e.to_string()))?;
    }
    let report = metrics::bench(&catalog, &selection, &inventory, &config)?;
    let text = match a.format {
        Format::Text => format!("normalized to stage0 median wall time\n{}", report.to_text()),
        Format::Csv => report.to_csv()?,
    };
    emit(None, &text)
}

pub fn cmd_report(a: &ReportArgs) -> Result<()> {
    let catalog = load_catalog(&a.catalog)?;
    let trace: Trace = parse_trace(&read(&a.trace)?).map_err(Error::Trace)?;
    let state = LoadState::from_trace(&catalog, &trace).map_err(Error::Trace)?;
    let t = metrics::timing_from_trace(&trace);
    let s = metrics::space_report(&catalog, &state);
    let mut out = String::new();
    match a.format {
        Format::Text => {
            let _ = writeln!(out, "loads        {}", t.loads);
            let _ = writeln!(out, "skip_hw      {}", t.skips_hw);
            let _ = writeln!(out, "skip_flag    {}", t.skips_flag);
            let _ = writeln!(out, "dup_attempts {}", t.dup_attempts);
            let _ = writeln!(out, "wall_us      {}", t.wall_us);
            let _ = writeln!(out, "total_kb     {}", s.total_kb);
            let _ = writeln!(out, "loaded_kb    {}", s.loaded_kb);
            let _ = writeln!(out, "saved_kb     {} ({:.1}%)", s.saved_kb, s.saved_pct());
            let _ = writeln!(out, "base_only_kb {}", s.base_only_kb);
        }
        Format::Csv => {
            let _ = writeln!(out, "loads,skip_hw,skip_flag,dup_attempts,wall_us,total_kb,loaded_kb,saved_kb,base_only_kb");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                t.loads, t.skips_hw, t.skips_flag, t.dup_attempts, t.wall_us, s.total_kb, s.loaded_kb, s.saved_kb, s.base_only_kb
            );
        }
    }
    emit(None, &out)
}
