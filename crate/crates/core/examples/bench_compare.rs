//! Benchmark every strategy on a 200-module fixture with a nonzero load cost.

use modattach::fixture::{generate, FixtureSpec};
use modattach::loader::LoadCost;
use modattach::metrics::{bench, BenchConfig};
use modattach::registry::{Selection, SelectionPolicy};

fn main() {
    let f = generate(FixtureSpec::new(200, 4, 3, 0.8)).unwrap();
    let selection = Selection::resolve(&SelectionPolicy::AllLoad, &f.catalog).unwrap();
    let config = BenchConfig { workers: 8, repetitions: 3, cost: LoadCost::new(50, 2), ..BenchConfig::default() };
    let report = bench(&f.catalog, &selection, &f.inventory, &config).unwrap();
    print!("{}", report.to_text());
    println!();
    print!("{}", report.to_csv().unwrap());
}
