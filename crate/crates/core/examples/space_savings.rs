//! Memory kept out of the kernel by not loading modules without hardware.

use modattach::catalog::parse_catalog;
use modattach::hardware::parse_inventory;
use modattach::loader::load_stage0;
use modattach::loader::LoadCost;
use modattach::metrics::space_report;
use modattach::registry::{register_v0, SelectionPolicy};

fn main() {
    let catalog = parse_catalog(
        "MODCAT v1\n\
         kern|9000||@base\n\
         inet6|2112||ipv6\n\
         arch_bundle|2331||sparc64\n\
         e1000|180||e1000\n",
    )
    .unwrap();
    let index = register_v0(&catalog, &SelectionPolicy::AllLoad).unwrap();

    for inv in ["HWINV v1\nIntel e1000\n", "HWINV v1\nIntel e1000\nIPv6 stack\n", "HWINV v1\ne1000\nipv6\nsparc64 cpu\n"] {
        let inventory = parse_inventory(inv).unwrap();
        let out = load_stage0(&catalog, &index, &inventory, LoadCost::INSTANT).unwrap();
        let r = space_report(&catalog, &out.state);
        println!(
            "devices {:?}: loaded {} KB, saved {} KB ({:.1}%), base {} KB",
            inventory.devices(),
            r.loaded_kb,
            r.saved_kb,
            r.saved_pct(),
            r.base_only_kb
        );
    }
}
