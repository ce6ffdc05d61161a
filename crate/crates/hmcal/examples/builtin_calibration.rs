//! Calibrates the builtin test simulator against a synthetic target and
//! prints the per-replicate outcomes.
//!
//! Run with `cargo run --release --example builtin_calibration`.

use std::time::Instant;

use hmcal::histmatch::{run, HmConfig};
use hmcal::sim::{target_from_point, DesignPoint, SimulatorSpec};

fn main() {
    let sim = SimulatorSpec::builtin();
    let x0 = DesignPoint::new(vec![0.5, 0.5]).unwrap();
    let target = target_from_point(&x0, &sim).unwrap();

    let replicates = 25;
    let mut log_deltas = Vec::new();
    let mut ns = Vec::new();
    for seed in 0..replicates {
        let cfg = HmConfig {
            seed,
            ..HmConfig::default()
        };
        let t0 = Instant::now();
        let result = run(&sim, &target, &cfg).unwrap();
        let dx = result
            .x_opt
            .coords()
            .iter()
            .zip(x0.coords())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        println!(
            "seed {seed}: N = {:3}  iters = {}  log_delta = {:+.4}  |x - x0|_inf = {:.4}  ({:?}, {:.2?})",
            result.n_evaluations,
            result.traces.len(),
            result.log_delta_opt(),
            dx,
            result.termination,
            t0.elapsed(),
        );
        log_deltas.push(result.log_delta_opt());
        ns.push(result.n_evaluations as f64);
    }
    log_deltas.sort_by(f64::total_cmp);
    ns.sort_by(f64::total_cmp);
    println!(
        "median log_delta = {:+.4}, median N = {}",
        log_deltas[log_deltas.len() / 2],
        ns[ns.len() / 2]
    );
}
