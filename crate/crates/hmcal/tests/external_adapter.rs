//! Round-trip tests of the subprocess adapter against scripted mock
//! simulators: identity, constant, failing, slow and malformed variants.

use std::io::Write;
use std::os::unix::fs::PermissionsExt;
use std::path::PathBuf;
use std::time::Duration;

use hmcal::sim::{DesignPoint, ExternalSpec, InputBounds, SimulatorSpec, TimeGrid};
use hmcal::SimError;

fn write_script(dir: &std::path::Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "#!/bin/sh").unwrap();
    f.write_all(body.as_bytes()).unwrap();
    drop(f);
    let mut perms = std::fs::metadata(&path).unwrap().permissions();
    perms.set_mode(0o755);
    std::fs::set_permissions(&path, perms).unwrap();
    path
}

fn unit_grid(l: usize) -> TimeGrid {
    TimeGrid::new((1..=l).map(|i| i as f64).collect()).unwrap()
}

fn pt(coords: &[f64]) -> DesignPoint {
    DesignPoint::new(coords.to_vec()).unwrap()
}

#[test]
fn identity_mock_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    // echoes its d = L comma-separated inputs back as L lines
    let exec = write_script(dir.path(), "identity.sh", "tr ',' '\\n'\n");
    let bounds = InputBounds::new(
        vec![-3.0, 0.0, 10.0],
        vec![5.0, 1.0, 30.0],
        vec!["a".into(), "b".into(), "c".into()],
    )
    .unwrap();
    let sim = SimulatorSpec::external(ExternalSpec::new(exec), unit_grid(3), bounds.clone());

    let x = pt(&[0.25, 0.5, 1.0]);
    let native = bounds.descale(&x);
    let series = sim.evaluate(&x).unwrap();
    // bit-exact: 17 significant digits survive the round trip
    assert_eq!(series.values(), native.as_slice());
}

#[test]
fn descaling_hits_native_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let exec = write_script(dir.path(), "identity.sh", "tr ',' '\\n'\n");
    let bounds = InputBounds::new(vec![2.0, -1.0], vec![4.0, 1.0], vec!["p".into(), "q".into()]).unwrap();
    let sim = SimulatorSpec::external(ExternalSpec::new(exec), unit_grid(2), bounds);
    // x = 0 must reach the executable as the lower bounds
    let series = sim.evaluate(&pt(&[0.0, 0.0])).unwrap();
    assert_eq!(series.values(), &[2.0, -1.0]);
    let series = sim.evaluate(&pt(&[1.0, 1.0])).unwrap();
    assert_eq!(series.values(), &[4.0, 1.0]);
}

#[test]
fn constant_mock_returns_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let exec = write_script(
        dir.path(),
        "zeros.sh",
        "i=0\nwhile [ $i -lt 101 ]; do echo 0; i=$((i+1)); done\n",
    );
    let bounds = InputBounds::unit(2);
    let sim = SimulatorSpec::external(ExternalSpec::new(exec), unit_grid(101), bounds);
    let series = sim.evaluate(&pt(&[0.3, 0.7])).unwrap();
    assert_eq!(series.len(), 101);
    assert!(series.values().iter().all(|&v| v == 0.0));
}

#[test]
fn failing_mock_is_a_process_error() {
    let dir = tempfile::tempdir().unwrap();
    let exec = write_script(dir.path(), "fail.sh", "echo boom >&2\nexit 3\n");
    let sim = SimulatorSpec::external(ExternalSpec::new(exec), unit_grid(4), InputBounds::unit(2));
    let err = sim.evaluate(&pt(&[0.5, 0.5])).unwrap_err();
    match err {
        SimError::ProcessFailure { x, message } => {
            assert_eq!(x, vec![0.5, 0.5]);
            assert!(message.contains('3'), "{message}");
            assert!(message.contains("boom"), "{message}");
        }
        other => panic!("expected ProcessFailure, got {other:?}"),
    }
}

#[test]
fn short_output_is_malformed() {
    let dir = tempfile::tempdir().unwrap();
    let exec = write_script(dir.path(), "short.sh", "echo 1\necho 2\necho 3\n");
    let sim = SimulatorSpec::external(ExternalSpec::new(exec), unit_grid(4), InputBounds::unit(2));
    let err = sim.evaluate(&pt(&[0.5, 0.5])).unwrap_err();
    match err {
        SimError::MalformedOutput { x, message } => {
            assert_eq!(x, vec![0.5, 0.5]);
            assert!(message.contains("expected 4"), "{message}");
        }
        other => panic!("expected MalformedOutput, got {other:?}"),
    }
}

#[test]
fn non_numeric_output_is_malformed() {
    let dir = tempfile::tempdir().unwrap();
    let exec = write_script(dir.path(), "garbage.sh", "echo 1\necho banana\n");
    let sim = SimulatorSpec::external(ExternalSpec::new(exec), unit_grid(2), InputBounds::unit(2));
    let err = sim.evaluate(&pt(&[0.5, 0.5])).unwrap_err();
    assert!(matches!(err, SimError::MalformedOutput { .. }), "{err:?}");
}

#[test]
fn slow_mock_times_out() {
    let dir = tempfile::tempdir().unwrap();
    let exec = write_script(dir.path(), "slow.sh", "sleep 30\necho 1\necho 2\n");
    let mut spec = ExternalSpec::new(exec);
    spec.timeout = Some(Duration::from_millis(300));
    let sim = SimulatorSpec::external(spec, unit_grid(2), InputBounds::unit(2));
    let start = std::time::Instant::now();
    let err = sim.evaluate(&pt(&[0.5, 0.5])).unwrap_err();
    assert!(matches!(err, SimError::Timeout { .. }), "{err:?}");
    assert!(start.elapsed() < Duration::from_secs(5));
}

#[test]
fn missing_executable_is_a_process_error() {
    let sim = SimulatorSpec::external(
        ExternalSpec::new(PathBuf::from("/nonexistent/simulator")),
        unit_grid(2),
        InputBounds::unit(2),
    );
    let err = sim.evaluate(&pt(&[0.5, 0.5])).unwrap_err();
    assert!(matches!(err, SimError::ProcessFailure { .. }), "{err:?}");
}

#[test]
fn batch_is_ordered_and_parallel() {
    let dir = tempfile::tempdir().unwrap();
    // output depends on the input so ordering mistakes are visible
    let exec = write_script(dir.path(), "ident2.sh", "tr ',' '\\n'\n");
    let mut spec = ExternalSpec::new(exec);
    spec.parallelism = 4;
    let bounds = InputBounds::unit(2);
    let sim = SimulatorSpec::external(spec, unit_grid(2), bounds);
    let xs: Vec<DesignPoint> = (0..12)
        .map(|i| pt(&[i as f64 / 11.0, 1.0 - i as f64 / 11.0]))
        .collect();
    let batch = sim.evaluate_batch(&xs).unwrap();
    for (x, series) in xs.iter().zip(&batch) {
        assert_eq!(series.values(), x.coords());
    }
}

#[test]
fn batch_reports_lowest_failing_input() {
    let dir = tempfile::tempdir().unwrap();
    // fails when the first input is above 0.5 (integer compare on the
    // mantissa digit is enough for the grid of points used here)
    let exec = write_script(
        dir.path(),
        "picky.sh",
        "IFS=, read -r a b\ncase \"$a\" in 7*|8*|9*) exit 1;; esac\necho \"$a\"\necho \"$b\"\n",
    );
    let mut spec = ExternalSpec::new(exec);
    spec.parallelism = 3;
    let sim = SimulatorSpec::external(spec, unit_grid(2), InputBounds::unit(2));
    // descaled == scaled on the unit box; 0.75 formats as 7.5e-1
    let xs = vec![pt(&[0.25, 0.1]), pt(&[0.75, 0.2]), pt(&[0.85, 0.3]), pt(&[0.35, 0.4])];
    let err = sim.evaluate_batch(&xs).unwrap_err();
    match err {
        SimError::ProcessFailure { x, .. } => assert_eq!(x, vec![0.75, 0.2]),
        other => panic!("expected ProcessFailure, got {other:?}"),
    }
}

#[test]
fn hm_run_id_is_exported() {
    let dir = tempfile::tempdir().unwrap();
    let marker = dir.path().join("run_ids.txt");
    let exec = write_script(
        dir.path(),
        "logger.sh",
        &format!("echo \"$HM_RUN_ID\" >> {}\necho 1\necho 2\n", marker.display()),
    );
    let sim = SimulatorSpec::external(ExternalSpec::new(exec), unit_grid(2), InputBounds::unit(2));
    sim.evaluate(&pt(&[0.1, 0.2])).unwrap();
    sim.evaluate(&pt(&[0.3, 0.4])).unwrap();
    let logged = std::fs::read_to_string(&marker).unwrap();
    let ids: Vec<&str> = logged.lines().collect();
    assert_eq!(ids.len(), 2);
    assert!(!ids[0].is_empty());
    assert_ne!(ids[0], ids[1], "run tokens must be unique");
}
