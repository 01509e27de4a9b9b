//! Seeded synthetic catalogs and inventories.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalog::{parse_catalog, ModuleCatalog, BASE_TAG, CATALOG_HEADER};
use crate::error::{Error, Result};
use crate::hardware::{parse_inventory, HardwareInventory, INVENTORY_HEADER};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureSpec {
    pub modules: usize,
    /// Longest dependency chain, counting the leaf as 1.
    pub max_depth: u32,
    pub seed: u64,
    /// Probability that a gated module's device is present.
    pub hw_coverage: f64,
}

impl FixtureSpec {
    pub fn new(modules: usize, max_depth: u32, seed: u64, hw_coverage: f64) -> Self {
        FixtureSpec { modules, max_depth, seed, hw_coverage }
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub catalog_text: String,
    pub inventory_text: String,
    pub catalog: ModuleCatalog,
    pub inventory: HardwareInventory,
}

const DECOY_DEVICES: &[&str] = &["Generic PCI Bridge", "Host bridge rev 2", "SMBus controller", "ISA bridge"];

/// Module names are `m0000`, `m0001`, ... Gated modules carry their own name
/// as hardware tag and are matched by a `Vendor <name> Controller` device.
/// The same spec always yields byte-identical files.
pub fn generate(spec: FixtureSpec) -> Result<Fixture> {
    if spec.modules == 0 {
        return Err(Error::Usage("fixture needs at least one module".into()));
    }
    if spec.max_depth == 0 {
        return Err(Error::Usage("fixture max depth must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&spec.hw_coverage) {
        return Err(Error::Usage(format!("hw coverage {} outside [0, 1]", spec.hw_coverage)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.modules;
    let width = n.saturating_sub(1).to_string().len().max(4);
    let name = |i: usize| format!("m{i:0width$}");

    // Zero-based level plan: module 0 is a leaf, the rest spread over 0..max_depth.
    let mut level: Vec<u32> = (0..n).map(|i| if i == 0 { 0 } else { rng.gen_range(0..spec.max_depth) }).collect();
    // A level is only reachable if the one below it is populated.
    level.sort_unstable();
    for i in 1..n {
        level[i] = level[i].min(level[i - 1] + 1);
    }
    let mut by_level: Vec<Vec<usize>> = vec![Vec::new(); spec.max_depth as usize];
    for (i, &l) in level.iter().enumerate() {
        by_level[l as usize].push(i);
    }

    let base: Vec<bool> = (0..n).map(|i| i > 0 && level[i] == 0 && rng.gen_bool(0.05)).collect();
    let mut lines = Vec::with_capacity(n + 4);
    let mut devices = Vec::new();
    for i in 0..n {
        let l = level[i] as usize;
        let mut deps = Vec::new();
        if l > 0 {
            let below = &by_level[l - 1];
            deps.push(*below.choose(&mut rng).expect("populated level"));
            for _ in 0..rng.gen_range(0..=2) {
                let pool = &by_level[rng.gen_range(0..l)];
                deps.push(*pool.choose(&mut rng).expect("populated level"));
            }
            deps.sort_unstable();
            deps.dedup();
        }
        let gated = !base[i] && (i == 0 || rng.gen_bool(0.3));
        let mut tags = Vec::new();
        if base[i] {
            tags.push(BASE_TAG.to_string());
        } else if gated {
            tags.push(name(i));
            if rng.gen_bool(spec.hw_coverage) {
                devices.push(format!("Vendor {} Controller", name(i)));
            }
        }
        let deps: Vec<String> = deps.into_iter().map(name).collect();
        lines.push(format!("{}|{}|{}|{}", name(i), rng.gen_range(8..=512), deps.join(","), tags.join(",")));
    }
    for _ in 0..(n / 25).max(1) {
        let i = rng.gen_range(0..n);
        lines.push(format!("{}.symbols|4||", name(i)));
    }
    for d in DECOY_DEVICES {
        if rng.gen_bool(0.5) {
            devices.push(d.to_string());
        }
    }
    lines.shuffle(&mut rng);
    devices.shuffle(&mut rng);

    let mut catalog_text = format!("{CATALOG_HEADER}\n# generated: modules={n} max_depth={} seed={}\n", spec.max_depth, spec.seed);
    for l in lines {
        catalog_text.push_str(&l);
        catalog_text.push('\n');
    }
    let mut inventory_text = format!("{INVENTORY_HEADER}\n");
    for d in devices {
        inventory_text.push_str(&d);
        inventory_text.push('\n');
    }
    let catalog = parse_catalog(&catalog_text)?;
    let inventory = parse_inventory(&inventory_text)?;
    Ok(Fixture { catalog_text, inventory_text, catalog, inventory })
}
