//! Many workers racing for one shared dependency: exactly one wins the claim.

use std::collections::BTreeMap;

use modattach::catalog::parse_catalog;
use modattach::hardware::HardwareInventory;
use modattach::loader::{load_stage3, EventKind, LoadCost};
use modattach::registry::{register_v0, SelectionPolicy};

fn main() {
    let catalog = parse_catalog("MODCAT v1\na|64||\nb|8|a|\nc|8|a|\n").unwrap();
    let index = register_v0(&catalog, &SelectionPolicy::AllLoad).unwrap();
    let inventory = HardwareInventory::default();

    for workers in [2, 4, 8] {
        let mut winners: BTreeMap<usize, usize> = BTreeMap::new();
        let mut dups = 0;
        for _ in 0..200 {
            let out = load_stage3(&catalog, &index, &inventory, workers, LoadCost::new(0, 1)).unwrap();
            let loads_of_a: Vec<_> = out.trace.events().iter().filter(|e| e.kind == EventKind::Load && e.module == "a").collect();
            assert_eq!(loads_of_a.len(), 1);
            *winners.entry(loads_of_a[0].worker).or_default() += 1;
            dups += out.trace.of_kind(EventKind::DupAttempt).count();
        }
        println!("workers {workers}: `a` loaded once in all 200 runs; winner histogram {winners:?}; {dups} DUP_ATTEMPT events");
    }
}
