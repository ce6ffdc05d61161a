//! Sweeps over a failing simulator record per-replicate failures without
//! poisoning the aggregates.

use std::io::Write;
use std::os::unix::fs::PermissionsExt;

use hmcal::histmatch::HmConfig;
use hmcal::sim::{ExternalSpec, InputBounds, SimulatorSpec, TimeGrid, TimeSeries};
use hmcal::sweep::{run_sweep, SweepDpsMode, SweepPlan};

#[test]
fn failures_are_counted_and_excluded() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fail.sh");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "#!/bin/sh\nexit 1").unwrap();
    drop(f);
    let mut perms = std::fs::metadata(&path).unwrap().permissions();
    perms.set_mode(0o755);
    std::fs::set_permissions(&path, perms).unwrap();

    let grid = TimeGrid::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let sim = SimulatorSpec::external(ExternalSpec::new(path), grid.clone(), InputBounds::unit(2));
    let target = TimeSeries::new(grid, vec![0.0; 4]).unwrap();

    let plan = SweepPlan {
        n1_levels: vec![4],
        c_levels: vec![3.0],
        tk_levels: vec![2],
        m_levels: vec![20],
        dps_mode: SweepDpsMode::Fixed,
        replications: 3,
        base_seed: 1,
        base: HmConfig {
            keep_series: false,
            budget: 30,
            max_iterations: 2,
            ..HmConfig::default()
        },
    };
    let mut rows_seen = 0;
    let result = run_sweep(&sim, &target, &plan, &mut |_| rows_seen += 1);
    assert_eq!(rows_seen, 3);
    assert_eq!(result.rows.len(), 3);
    assert!(result.rows.iter().all(|r| !r.ok));
    assert!(result.rows.iter().all(|r| r.status.starts_with("failed")));
    let cell = &result.cells[0];
    assert_eq!(cell.failures, 3);
    assert!(cell.median_log_delta.is_nan());
}
