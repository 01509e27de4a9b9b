use std::collections::HashMap;

use crate::catalog::ModuleCatalog;

use super::trace::{EventKind, Trace};

/// Structural checks over a finished trace.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceAudit {
    /// `(module, dependency)` pairs where the module's LOAD is not preceded
    /// by a LOAD of the dependency. Base-kernel dependencies are always
    /// satisfied.
    pub dependency_violations: Vec<(String, String)>,
    /// Modules with more than one LOAD event.
    pub duplicate_loads: Vec<String>,
    /// LOAD events naming modules outside the catalog.
    pub unknown_modules: Vec<String>,
}

impl TraceAudit {
    pub fn is_clean(&self) -> bool {
        self.dependency_violations.is_empty() && self.duplicate_loads.is_empty() && self.unknown_modules.is_empty()
    }
}

pub fn audit_trace(catalog: &ModuleCatalog, trace: &Trace) -> TraceAudit {
    let mut audit = TraceAudit::default();
    let mut loaded_at: HashMap<usize, usize> = HashMap::new();
    for (seq, e) in trace.events().iter().enumerate().filter(|(_, e)| e.kind == EventKind::Load) {
        let Some(pos) = catalog.position(&e.module) else {
            audit.unknown_modules.push(e.module.clone());
            continue;
        };
        if loaded_at.insert(pos, seq).is_some() {
            audit.duplicate_loads.push(e.module.clone());
        }
        for &d in catalog.deps_of(pos) {
            let dep = catalog.record(d);
            if !dep.base_kernel_only && !loaded_at.contains_key(&d) {
                audit.dependency_violations.push((e.module.clone(), dep.name.clone()));
            }
        }
    }
    audit
}
