//! Build v0 (load bits) and v1 (dependency levels) index files.

use modattach::catalog::parse_catalog;
use modattach::hardware::parse_inventory;
use modattach::registry::{read_index, register_v0, register_v1, write_index, SelectionPolicy};

fn main() {
    let catalog = parse_catalog(
        "MODCAT v1\n\
         a|10||\n\
         b|20|a|\n\
         c|30|b|\n\
         gpu|900|a|nvidia\n\
         d|5||\n",
    )
    .unwrap();
    let inventory = parse_inventory("HWINV v1\nIntel chipset\n").unwrap();
    let policy = SelectionPolicy::FromFile(vec!["c".into(), "gpu".into()]);

    let v0 = register_v0(&catalog, &policy).unwrap();
    print!("{}", write_index(&v0));
    // gpu has no device, so it stays 0; c pulls in b and a with their levels.
    let v1 = register_v1(&catalog, &policy, &inventory).unwrap();
    let text = write_index(&v1);
    print!("{text}");
    assert_eq!(read_index(&text, &catalog).unwrap(), v1);

    let deep: String = std::iter::once("MODCAT v1\n".to_string())
        .chain((0..256).map(|i| if i == 0 { format!("m{i:04}|1||\n") } else { format!("m{i:04}|1|m{:04}|\n", i - 1) }))
        .collect();
    let deep = parse_catalog(&deep).unwrap();
    let err = register_v1(&deep, &SelectionPolicy::AllLoad, &inventory).unwrap_err();
    println!("256-deep chain: {} ({err})", err.code());
}
