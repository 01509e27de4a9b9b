//! Parse a catalog and print each module's dependency level.

use modattach::catalog::{parse_catalog, topo_levels};

const CATALOG: &str = "\
MODCAT v1
# name|size_kb|deps|hw tags
usb_core|512||
usb_storage|1024|usb_core|usb
usb_storage.symbols|12||
scsi|800||
sd|300|scsi,usb_storage|
ffs|2112||@base
";

fn main() {
    let catalog = parse_catalog(CATALOG).expect("valid catalog");
    println!("{} modules, {} KB total", catalog.len(), catalog.total_kb());
    for (name, level) in topo_levels(&catalog) {
        println!("  {name:<12} level {level}");
    }

    let cyclic = "MODCAT v1\na|1|b|\nb|1|a|\n";
    match parse_catalog(cyclic) {
        Err(e) => println!("cyclic catalog rejected: {} ({e})", e.code()),
        Ok(_) => unreachable!(),
    }
}
