//! Which modules does a given machine support?

use modattach::catalog::parse_catalog;
use modattach::hardware::{check_hardware_support, parse_inventory};

fn main() {
    let catalog = parse_catalog(
        "MODCAT v1\n\
         e1000|180||e1000,intel_eth\n\
         nvidia|2048||nvidia\n\
         snd_hda|400||hda\n\
         tun|40||\n",
    )
    .unwrap();
    let inventory = parse_inventory("HWINV v1\nIntel E1000 Gigabit Ethernet\nHDA Intel PCH audio\n").unwrap();

    for m in catalog.records() {
        let ok = check_hardware_support(m, &inventory);
        println!("{:<8} tags {:<20} {}", m.name, m.hw_tags.join(","), if ok { "supported" } else { "no device" });
    }
    // Matching is whole-word: `hda` does not match inside `shdaX`.
    let partial = parse_inventory("HWINV v1\nshdaX bridge\n").unwrap();
    println!("snd_hda on `shdaX bridge`: {}", check_hardware_support(catalog.get("snd_hda").unwrap(), &partial));
}
