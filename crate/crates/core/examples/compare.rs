//! Mean delay of each controller on the isolated intersection under tidal
//! demand, at a few penetration rates.
//!
//! ```text
//! cargo run --release --example compare
//! ```

use bpeq::control::ControllerKind;
use bpeq::harness::{run_sweep, DemandSource, ScenarioConfig, SweepSpec};
use std::path::Path;

fn main() {
    let mut cfg = ScenarioConfig::minimal(
        "builtin:isolated",
        DemandSource::Named("builtin:isolated_high".into()),
    );
    cfg.duration_s = 3600.0;
    cfg.metrics_window_s = 600.0;
    let scenario = cfg.resolve(Path::new(".")).expect("bundled scenario");
    let spec = SweepSpec {
        controllers: vec![
            ControllerKind::Fixed,
            ControllerKind::BpPerfect,
            ControllerKind::BpEq,
        ],
        penetrations: vec![0.1, 0.3, 1.0],
        seeds: vec![0, 1, 2],
        max_runs: 100,
    };
    let results = run_sweep(&scenario, &spec).expect("sweep");
    println!("{:<12} {:>5} {:>10}", "controller", "p", "delay (s)");
    for chunk in results.runs.chunks(spec.seeds.len()) {
        let delays: Vec<f64> = chunk
            .iter()
            .filter_map(|r| r.summary())
            .map(|s| s.mean_delay)
            .collect();
        let mean = delays.iter().sum::<f64>() / delays.len() as f64;
        let key = &chunk[0].key;
        println!(
            "{:<12} {:>5} {:>10.1}",
            key.controller, key.penetration, mean
        );
    }
}
