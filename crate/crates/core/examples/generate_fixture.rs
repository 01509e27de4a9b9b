//! Generate a seeded catalog and inventory, optionally writing them to a directory.
//!
//! `cargo run --example generate_fixture -- [DIR]`

use modattach::fixture::{generate, FixtureSpec};

fn main() {
    let f = generate(FixtureSpec::new(30, 3, 42, 0.5)).unwrap();
    match std::env::args().nth(1) {
        Some(dir) => {
            let dir = std::path::Path::new(&dir);
            std::fs::write(dir.join("catalog.txt"), &f.catalog_text).unwrap();
            std::fs::write(dir.join("inventory.txt"), &f.inventory_text).unwrap();
            println!("wrote {} and {}", dir.join("catalog.txt").display(), dir.join("inventory.txt").display());
        }
        None => {
            print!("{}", f.catalog_text);
            println!();
            print!("{}", f.inventory_text);
        }
    }
    let again = generate(FixtureSpec::new(30, 3, 42, 0.5)).unwrap();
    assert_eq!(again.catalog_text, f.catalog_text);
}
