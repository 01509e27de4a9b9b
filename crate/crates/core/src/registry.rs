//! Module registration: turning a user selection into an index file.
//!
//! Two index formats exist, both positionally aligned with the catalog:
//!
//! * `v0` stores one load bit per module. Hardware is not consulted here; the
//!   loader checks it at every boot.
//! * `v1` stores a dependency-depth byte per module. `0` means "not loaded"
//!   (unselected or unsupported), `1` an independent module and `2..=255` a
//!   module that must wait for dependencies on lower levels. Hardware is
//!   checked once, here, and the loader only sweeps levels.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::catalog::ModuleCatalog;
use crate::hardware::{DeviceMatcher, HardwareInventory};

/// Largest level a v1 entry can hold.
pub const MAX_LEVEL: u32 = u8::MAX as u32;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("selection names unknown module `{0}`")]
    UnknownSelection(String),
    #[error("module `{module}` would need dependency level {level}, above the limit of {MAX_LEVEL}")]
    DepthOverflow { module: String, level: u32 },
    #[error("expected index header `MODINDEX v0` or `MODINDEX v1`, found `{0}`")]
    VersionMismatch(String),
    #[error("index position {position}: expected `{expected}`, found `{found}`")]
    PositionMismatch {
        position: usize,
        expected: String,
        found: String,
    },
    #[error("index value {value} for `{module}` exceeds {max}")]
    ValueOutOfRange { module: String, value: u64, max: u8 },
    #[error("index line {line}: {reason}")]
    MalformedIndex { line: usize, reason: String },
    #[error("interactive selection: {0}")]
    Prompt(#[from] io::Error),
}

impl RegistryError {
    pub fn code(&self) -> &'static str {
        match self {
            RegistryError::UnknownSelection(_) => "unknown-selection",
            RegistryError::DepthOverflow { .. } => "depth-overflow",
            RegistryError::VersionMismatch(_) => "version-mismatch",
            RegistryError::PositionMismatch { .. } => "position-mismatch",
            RegistryError::ValueOutOfRange { .. } => "value-out-of-range",
            RegistryError::MalformedIndex { .. } => "malformed-index",
            RegistryError::Prompt(_) => "prompt",
        }
    }
}

/// How the user's load/unload answers are obtained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectionPolicy {
    AllLoad,
    AllSkip,
    FromFile(Vec<String>),
    /// Ask on standard input, once per module in catalog order.
    Interactive,
}

/// Resolved per-position load/unload answers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection(Vec<bool>);

impl Selection {
    pub fn resolve(policy: &SelectionPolicy, catalog: &ModuleCatalog) -> Result<Self, RegistryError> {
        match policy {
            SelectionPolicy::AllLoad => Ok(Selection(vec![true; catalog.len()])),
            SelectionPolicy::AllSkip => Ok(Selection(vec![false; catalog.len()])),
            SelectionPolicy::FromFile(names) => Selection::from_names(catalog, names),
            SelectionPolicy::Interactive => {
                let stdin = io::stdin();
                Selection::prompt(catalog, stdin.lock(), io::stderr())
            }
        }
    }

    pub fn from_names<S: AsRef<str>>(catalog: &ModuleCatalog, names: &[S]) -> Result<Self, RegistryError> {
        let mut picked = vec![false; catalog.len()];
        for n in names {
            let n = n.as_ref();
            let pos = catalog
                .position(n)
                .ok_or_else(|| RegistryError::UnknownSelection(n.to_string()))?;
            picked[pos] = true;
        }
        Ok(Selection(picked))
    }

    pub fn from_flags(flags: Vec<bool>) -> Self {
        Selection(flags)
    }

    /// Asks `load <name>? [y/n]` for every module in catalog order.
    ///
    /// Answers starting with `y` select the module; anything else declines
    /// it. Running out of input before the last module is an error.
    pub fn prompt<R: BufRead, W: Write>(
        catalog: &ModuleCatalog,
        mut input: R,
        mut output: W,
    ) -> Result<Self, RegistryError> {
        let mut picked = Vec::with_capacity(catalog.len());
        let mut answer = String::new();
        for r in catalog.records() {
            write!(output, "load {}? [y/n] ", r.name)?;
            output.flush()?;
            answer.clear();
            if input.read_line(&mut answer)? == 0 {
                return Err(RegistryError::Prompt(io::Error::new(
                    io::ErrorKind::UnexpectedEof,
                    format!("input ended before `{}` was answered", r.name),
                )));
            }
            picked.push(answer.trim_start().to_ascii_lowercase().starts_with('y'));
        }
        Ok(Selection(picked))
    }

    pub fn is_selected(&self, position: usize) -> bool {
        self.0[position]
    }

    pub fn flags(&self) -> &[bool] {
        &self.0
    }
}

/// Module names from a selection file: one per line, `#` comments allowed.
pub fn parse_selection_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IndexVersion {
    V0,
    V1,
}

impl IndexVersion {
    pub fn max_value(self) -> u8 {
        match self {
            IndexVersion::V0 => 1,
            IndexVersion::V1 => u8::MAX,
        }
    }

    pub fn header(self) -> &'static str {
        match self {
            IndexVersion::V0 => "MODINDEX v0",
            IndexVersion::V1 => "MODINDEX v1",
        }
    }
}

impl fmt::Display for IndexVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IndexVersion::V0 => "v0",
            IndexVersion::V1 => "v1",
        })
    }
}

impl FromStr for IndexVersion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "v0" => Ok(IndexVersion::V0),
            "v1" => Ok(IndexVersion::V1),
            other => Err(format!("unknown index version `{other}` (expected v0 or v1)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexEntry {
    pub name: String,
    pub value: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexFile {
    version: IndexVersion,
    entries: Vec<IndexEntry>,
}

impl IndexFile {
    /// Builds an index from per-position values; `values` must line up with
    /// the catalog.
    pub fn from_values(catalog: &ModuleCatalog, version: IndexVersion, values: &[u8]) -> Result<Self, RegistryError> {
        if values.len() != catalog.len() {
            return Err(RegistryError::PositionMismatch {
                position: values.len().min(catalog.len()),
                expected: format!("{} entries", catalog.len()),
                found: format!("{} entries", values.len()),
            });
        }
        let entries = catalog
            .records()
            .iter()
            .zip(values)
            .map(|(r, &value)| {
                if value > version.max_value() {
                    Err(RegistryError::ValueOutOfRange {
                        module: r.name.clone(),
                        value: value.into(),
                        max: version.max_value(),
                    })
                } else {
                    Ok(IndexEntry { name: r.name.clone(), value })
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(IndexFile { version, entries })
    }

    pub fn version(&self) -> IndexVersion {
        self.version
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn value(&self, position: usize) -> u8 {
        self.entries[position].value
    }

    pub fn values(&self) -> Vec<u8> {
        self.entries.iter().map(|e| e.value).collect()
    }

    /// First position whose name disagrees with the catalog, if any.
    pub fn misalignment(&self, catalog: &ModuleCatalog) -> Option<RegistryError> {
        let n = self.entries.len().max(catalog.len());
        (0..n).find_map(|i| {
            let expected = catalog.records().get(i).map(|r| r.name.as_str());
            let found = self.entries.get(i).map(|e| e.name.as_str());
            (expected != found).then(|| RegistryError::PositionMismatch {
                position: i,
                expected: expected.unwrap_or("<end of catalog>").to_string(),
                found: found.unwrap_or("<end of index>").to_string(),
            })
        })
    }
}

/// Stage-0 registration: one load bit per module, straight from the
/// selection.
pub fn register_v0(catalog: &ModuleCatalog, policy: &SelectionPolicy) -> Result<IndexFile, RegistryError> {
    Ok(register_v0_with(catalog, &Selection::resolve(policy, catalog)?))
}

pub fn register_v0_with(catalog: &ModuleCatalog, selection: &Selection) -> IndexFile {
    IndexFile {
        version: IndexVersion::V0,
        entries: catalog
            .records()
            .iter()
            .zip(selection.flags())
            .map(|(r, &on)| IndexEntry { name: r.name.clone(), value: on.into() })
            .collect(),
    }
}

/// Stage-1 registration: dependency-depth bytes for every selected,
/// hardware-supported module and everything it depends on.
pub fn register_v1(
    catalog: &ModuleCatalog,
    policy: &SelectionPolicy,
    inventory: &HardwareInventory,
) -> Result<IndexFile, RegistryError> {
    register_v1_with(catalog, &Selection::resolve(policy, catalog)?, inventory)
}

pub fn register_v1_with(
    catalog: &ModuleCatalog,
    selection: &Selection,
    inventory: &HardwareInventory,
) -> Result<IndexFile, RegistryError> {
    let matcher = DeviceMatcher::new(inventory);
    let mut levels = vec![0u32; catalog.len()];
    for (i, r) in catalog.records().iter().enumerate() {
        if selection.is_selected(i) && matcher.supports(r) {
            let level = handle_dependency(catalog, i, &mut levels)?;
            levels[i] = levels[i].max(level);
        }
    }
    let entries = catalog
        .records()
        .iter()
        .zip(&levels)
        .map(|(r, &l)| IndexEntry { name: r.name.clone(), value: l as u8 })
        .collect();
    Ok(IndexFile { version: IndexVersion::V1, entries })
}

/// Levels `root` and, transitively, all of its dependencies, storing each
/// result in `levels`. Entries that are already nonzero are final.
///
/// Explicit stack instead of recursion: chains can be as long as the level
/// limit allows and a bit beyond before the overflow is detected.
fn handle_dependency(catalog: &ModuleCatalog, root: usize, levels: &mut [u32]) -> Result<u32, RegistryError> {
    if levels[root] != 0 {
        return Ok(levels[root]);
    }
    let mut stack = vec![(root, false)];
    while let Some((m, expanded)) = stack.pop() {
        if levels[m] != 0 {
            continue;
        }
        if !expanded {
            stack.push((m, true));
            stack.extend(catalog.deps_of(m).iter().filter(|&&d| levels[d] == 0).map(|&d| (d, false)));
            continue;
        }
        let level = 1 + catalog.deps_of(m).iter().map(|&d| levels[d]).max().unwrap_or(0);
        if level > MAX_LEVEL {
            return Err(RegistryError::DepthOverflow {
                module: catalog.record(m).name.clone(),
                level,
            });
        }
        levels[m] = level;
    }
    Ok(levels[root])
}

pub fn write_index(index: &IndexFile) -> String {
    let mut out = String::with_capacity(16 * (index.len() + 1));
    out.push_str(index.version.header());
    out.push('\n');
    for e in &index.entries {
        out.push_str(&e.name);
        out.push(' ');
        out.push_str(&e.value.to_string());
        out.push('\n');
    }
    out
}

/// Parses an index file and checks it entry by entry against the catalog.
pub fn read_index(text: &str, catalog: &ModuleCatalog) -> Result<IndexFile, RegistryError> {
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l.trim_end()).unwrap_or("");
    let version = match header {
        "MODINDEX v0" => IndexVersion::V0,
        "MODINDEX v1" => IndexVersion::V1,
        other if other.starts_with("MODINDEX ") => return Err(RegistryError::VersionMismatch(other.to_string())),
        _ => {
            return Err(RegistryError::MalformedIndex {
                line: 1,
                reason: format!("expected `MODINDEX v0` or `MODINDEX v1` header, found `{header}`"),
            })
        }
    };

    let max = version.max_value();
    let mut entries = Vec::with_capacity(catalog.len());
    for (lineno, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(RegistryError::MalformedIndex {
                line: lineno + 1,
                reason: "expected `<name> <value>`".to_string(),
            });
        };
        let value: u64 = value.parse().map_err(|_| RegistryError::MalformedIndex {
            line: lineno + 1,
            reason: format!("value `{value}` is not a non-negative integer"),
        })?;

        let position = entries.len();
        let expected = catalog.records().get(position).map(|r| r.name.as_str());
        if expected != Some(name) {
            return Err(RegistryError::PositionMismatch {
                position,
                expected: expected.unwrap_or("<end of catalog>").to_string(),
                found: name.to_string(),
            });
        }
        if value > u64::from(max) {
            return Err(RegistryError::ValueOutOfRange { module: name.to_string(), value, max });
        }
        entries.push(IndexEntry { name: name.to_string(), value: value as u8 });
    }
    if entries.len() != catalog.len() {
        return Err(RegistryError::PositionMismatch {
            position: entries.len(),
            expected: catalog.record(entries.len()).name.clone(),
            found: "<end of index>".to_string(),
        });
    }
    Ok(IndexFile { version, entries })
}
