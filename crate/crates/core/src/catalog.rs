//! Module catalog: the modelled kernel-modules directory.
//!
//! A catalog file is line oriented:
//!
//! ```text
//! MODCAT v1
//! # name|size_kb|dep1,dep2|tag1,tag2
//! if_em|180|pci|e1000
//! pci|96||@base
//! ```
//!
//! Records are sorted bytewise by name after parsing, and the position of a
//! record in that order is the index every [`crate::registry::IndexFile`]
//! refers to. Helper entries whose name ends in `.symbols` are dropped.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

/// First line of every catalog file.
pub const CATALOG_HEADER: &str = "MODCAT v1";

/// Reserved hardware tag marking a module that lives in the base kernel.
pub const BASE_TAG: &str = "@base";

const SYMBOLS_SUFFIX: &str = ".symbols";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogError {
    #[error("missing `{CATALOG_HEADER}` header")]
    MissingHeader,
    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("module `{module}` depends on unknown module `{dependency}`")]
    UnknownDependency { module: String, dependency: String },
    #[error("circular dependency: {}", .0.join(" -> "))]
    CircularDependency(Vec<String>),
    #[error("duplicate module `{0}`")]
    DuplicateModule(String),
    #[error("base-kernel module `{module}` depends on loadable module `{dependency}`")]
    BaseDependsOnLoadable { module: String, dependency: String },
}

impl CatalogError {
    pub fn code(&self) -> &'static str {
        match self {
            CatalogError::MissingHeader | CatalogError::MalformedRecord { .. } => "malformed-record",
            CatalogError::UnknownDependency { .. } => "unknown-dependency",
            CatalogError::CircularDependency(_) => "circular-dependency",
            CatalogError::DuplicateModule(_) => "duplicate-module",
            CatalogError::BaseDependsOnLoadable { .. } => "base-depends-on-loadable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleRecord {
    pub name: String,
    pub size_kb: u64,
    pub deps: Vec<String>,
    /// Device-match strings. Never contains [`BASE_TAG`]; that tag is lifted
    /// into `base_kernel_only` at parse time.
    pub hw_tags: Vec<String>,
    /// The module cannot be attached dynamically.
    pub base_kernel_only: bool,
}

impl ModuleRecord {
    pub fn new(name: impl Into<String>, size_kb: u64) -> Self {
        ModuleRecord {
            name: name.into(),
            size_kb,
            deps: Vec::new(),
            hw_tags: Vec::new(),
            base_kernel_only: false,
        }
    }

    pub fn with_deps<I, S>(mut self, deps: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.deps = deps.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_tags<I, S>(mut self, tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.hw_tags = tags.into_iter().map(Into::into).collect();
        self
    }

    pub fn base_kernel(mut self) -> Self {
        self.base_kernel_only = true;
        self
    }
}

/// Alphabetically ordered, acyclic set of module records.
///
/// Immutable once built; every accessor takes `&self`, so a catalog can be
/// shared across loader threads freely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleCatalog {
    records: Vec<ModuleRecord>,
    index_of: HashMap<String, usize>,
    dep_index: Vec<Vec<usize>>,
    topo_order: Vec<usize>,
}

impl ModuleCatalog {
    /// Validates and orders a set of records.
    ///
    /// Records named `*.symbols` are discarded before any other check.
    pub fn from_records(records: impl IntoIterator<Item = ModuleRecord>) -> Result<Self, CatalogError> {
        let mut records: Vec<ModuleRecord> = records
            .into_iter()
            .filter(|r| !r.name.ends_with(SYMBOLS_SUFFIX))
            .collect();
        records.sort_by(|a, b| a.name.as_bytes().cmp(b.name.as_bytes()));

        let mut index_of = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if index_of.insert(r.name.clone(), i).is_some() {
                return Err(CatalogError::DuplicateModule(r.name.clone()));
            }
        }

        let mut dep_index = Vec::with_capacity(records.len());
        for r in &mut records {
            let mut seen = Vec::with_capacity(r.deps.len());
            let mut idx = Vec::with_capacity(r.deps.len());
            for d in &r.deps {
                let Some(&j) = index_of.get(d) else {
                    return Err(CatalogError::UnknownDependency {
                        module: r.name.clone(),
                        dependency: d.clone(),
                    });
                };
                if !idx.contains(&j) {
                    idx.push(j);
                    seen.push(d.clone());
                }
            }
            r.deps = seen;
            dep_index.push(idx);
        }

        for (r, ds) in records.iter().zip(&dep_index) {
            if let Some(&d) = ds.iter().find(|&&d| r.base_kernel_only && !records[d].base_kernel_only) {
                return Err(CatalogError::BaseDependsOnLoadable {
                    module: r.name.clone(),
                    dependency: records[d].name.clone(),
                });
            }
        }

        if let Some(cycle) = find_cycle(&dep_index) {
            return Err(CatalogError::CircularDependency(
                cycle.into_iter().map(|i| records[i].name.clone()).collect(),
            ));
        }
        let topo_order = dependency_first_order(&dep_index);

        Ok(ModuleCatalog {
            records,
            index_of,
            dep_index,
            topo_order,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[ModuleRecord] {
        &self.records
    }

    pub fn record(&self, position: usize) -> &ModuleRecord {
        &self.records[position]
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index_of.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&ModuleRecord> {
        self.position(name).map(|i| &self.records[i])
    }

    /// Catalog positions of the direct dependencies of `position`.
    pub fn deps_of(&self, position: usize) -> &[usize] {
        &self.dep_index[position]
    }

    /// Positions ordered so that every module follows all of its dependencies.
    pub fn dependency_order(&self) -> &[usize] {
        &self.topo_order
    }

    /// Dependency levels by position: 1 for leaves, otherwise one more than
    /// the deepest dependency.
    pub fn levels(&self) -> Vec<u32> {
        let mut level = vec![0u32; self.len()];
        for &i in &self.topo_order {
            level[i] = 1 + self.dep_index[i].iter().map(|&d| level[d]).max().unwrap_or(0);
        }
        level
    }

    /// Every module reachable from `roots` through dependency edges,
    /// including the roots themselves.
    pub fn closure(&self, roots: impl IntoIterator<Item = usize>) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut stack: Vec<usize> = roots.into_iter().collect();
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut seen[i], true) {
                continue;
            }
            stack.extend(self.dep_index[i].iter().copied().filter(|&d| !seen[d]));
        }
        seen
    }

    pub fn total_kb(&self) -> u64 {
        self.records.iter().map(|r| r.size_kb).sum()
    }

    /// Renders the catalog in `MODCAT v1` form, records in catalog order.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(32 * (self.len() + 1));
        out.push_str(CATALOG_HEADER);
        out.push('\n');
        for r in &self.records {
            let mut tags: Vec<&str> = r.hw_tags.iter().map(String::as_str).collect();
            if r.base_kernel_only {
                tags.push(BASE_TAG);
            }
            let _ = writeln!(out, "{}|{}|{}|{}", r.name, r.size_kb, r.deps.join(","), tags.join(","));
        }
        out
    }
}

/// Parses `MODCAT v1` text into a validated catalog.
pub fn parse_catalog(text: &str) -> Result<ModuleCatalog, CatalogError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim_end() == CATALOG_HEADER => {}
        _ => return Err(CatalogError::MissingHeader),
    }

    let mut records = Vec::new();
    for (lineno, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        records.push(parse_record(line, lineno + 1)?);
    }
    ModuleCatalog::from_records(records)
}

/// Dependency levels keyed by module name.
pub fn topo_levels(catalog: &ModuleCatalog) -> BTreeMap<String, u32> {
    catalog
        .levels()
        .into_iter()
        .enumerate()
        .map(|(i, l)| (catalog.record(i).name.clone(), l))
        .collect()
}

fn parse_record(line: &str, lineno: usize) -> Result<ModuleRecord, CatalogError> {
    let malformed = |reason: String| CatalogError::MalformedRecord { line: lineno, reason };

    let fields: Vec<&str> = line.split('|').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(malformed(format!("expected 4 `|`-separated fields, found {}", fields.len())));
    }
    let name = fields[0];
    validate_name(name).map_err(|r| malformed(r.to_string()))?;
    let size_kb = fields[1]
        .parse::<u64>()
        .map_err(|_| malformed(format!("size `{}` is not a non-negative integer", fields[1])))?;

    let deps = split_list(fields[2]).map_err(|r| malformed(format!("dependency list: {r}")))?;
    for d in &deps {
        validate_name(d).map_err(|r| malformed(format!("dependency `{d}`: {r}")))?;
    }

    let mut base_kernel_only = false;
    let mut hw_tags = Vec::new();
    for tag in split_list(fields[3]).map_err(|r| malformed(format!("tag list: {r}")))? {
        if tag == BASE_TAG {
            base_kernel_only = true;
        } else if tag.starts_with('@') {
            return Err(malformed(format!("unknown reserved tag `{tag}`")));
        } else {
            hw_tags.push(tag);
        }
    }

    Ok(ModuleRecord {
        name: name.to_string(),
        size_kb,
        deps,
        hw_tags,
        base_kernel_only,
    })
}

fn split_list(field: &str) -> Result<Vec<String>, &'static str> {
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field
        .split(',')
        .map(|s| {
            let s = s.trim();
            if s.is_empty() {
                Err("empty list item")
            } else {
                Ok(s.to_string())
            }
        })
        .collect()
}

// Names end up as whitespace-separated tokens in index and trace files and as
// comma-separated list items here, so those characters are refused too.
fn validate_name(name: &str) -> Result<(), &'static str> {
    if name.is_empty() {
        return Err("empty module name");
    }
    if name.starts_with('#') {
        return Err("module name may not start with `#`");
    }
    if name.chars().any(|c| c.is_whitespace() || c == '|' || c == ',') {
        return Err("module name contains whitespace, `|` or `,`");
    }
    Ok(())
}

fn find_cycle(deps: &[Vec<usize>]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut mark = vec![Mark::New; deps.len()];
    let mut path: Vec<usize> = Vec::new();
    // (node, next dependency slot to visit)
    let mut stack: Vec<(usize, usize)> = Vec::new();

    for start in 0..deps.len() {
        if mark[start] != Mark::New {
            continue;
        }
        stack.push((start, 0));
        mark[start] = Mark::Active;
        path.push(start);
        while let Some(top) = stack.last_mut() {
            let node = top.0;
            if let Some(&d) = deps[node].get(top.1) {
                top.1 += 1;
                match mark[d] {
                    Mark::New => {
                        mark[d] = Mark::Active;
                        path.push(d);
                        stack.push((d, 0));
                    }
                    Mark::Active => {
                        let from = path.iter().position(|&p| p == d).expect("active node on path");
                        return Some(path[from..].to_vec());
                    }
                    Mark::Done => {}
                }
            } else {
                mark[node] = Mark::Done;
                path.pop();
                stack.pop();
            }
        }
    }
    None
}

fn dependency_first_order(deps: &[Vec<usize>]) -> Vec<usize> {
    let n = deps.len();
    let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut pending: Vec<usize> = deps.iter().map(Vec::len).collect();
    for (m, ds) in deps.iter().enumerate() {
        for &d in ds {
            dependents[d].push(m);
        }
    }
    let mut order: Vec<usize> = (0..n).filter(|&i| pending[i] == 0).collect();
    let mut head = 0;
    while head < order.len() {
        let d = order[head];
        head += 1;
        for &m in &dependents[d] {
            pending[m] -= 1;
            if pending[m] == 0 {
                order.push(m);
            }
        }
    }
    debug_assert_eq!(order.len(), n, "graph checked acyclic");
    order
}
