//! Run all four loading strategies on one generated fixture and compare traces.

use modattach::fixture::{generate, FixtureSpec};
use modattach::loader::{audit_trace, load, LoadCost, Strategy, StrategyConfig};
use modattach::metrics::timing_from_trace;
use modattach::registry::{register_v0, register_v1, SelectionPolicy};

fn main() {
    let f = generate(FixtureSpec::new(60, 4, 11, 0.7)).unwrap();
    let policy = SelectionPolicy::AllLoad;
    let v0 = register_v0(&f.catalog, &policy).unwrap();
    let v1 = register_v1(&f.catalog, &policy, &f.inventory).unwrap();
    let cost = LoadCost::new(30, 1);

    for strategy in Strategy::ALL {
        let workers = if strategy.min_workers() > 1 || strategy == Strategy::Stage2 { 4 } else { 1 };
        let index = if strategy == Strategy::Stage1 { &v1 } else { &v0 };
        let out = load(&f.catalog, index, &f.inventory, &StrategyConfig::new(strategy, workers, cost)).unwrap();
        let t = timing_from_trace(&out.trace);
        println!(
            "{strategy} x{workers}: {} loads, {} skip_hw, {} dup, wall {}us, clean {}",
            t.loads,
            t.skips_hw,
            t.dup_attempts,
            t.wall_us,
            audit_trace(&f.catalog, &out.trace).is_clean()
        );
    }

    let out = load(&f.catalog, &v0, &f.inventory, &StrategyConfig::new(Strategy::Stage3, 4, LoadCost::INSTANT)).unwrap();
    println!("\nfirst stage3 trace lines:");
    for line in out.trace.to_text().lines().take(8) {
        println!("  {line}");
    }
}
