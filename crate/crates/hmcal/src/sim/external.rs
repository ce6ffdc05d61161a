//! Subprocess adapter for external simulators.
//!
//! Wire protocol: the engine writes one line to the child's standard input
//! (the d native-unit inputs, comma-separated, 17 significant digits, no
//! whitespace); the child writes exactly L lines to standard output, one
//! real per line, and exits 0. Any other exit code, a wrong line count or
//! a non-numeric line is an evaluation error carrying the offending input.
//! `HM_RUN_ID` is set to a unique token for child-side logging.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::error::SimError;
use crate::sim::{DesignPoint, TimeGrid, TimeSeries};

/// How to drive one external executable.
#[derive(Debug, Clone)]
pub struct ExternalSpec {
    pub exec_path: PathBuf,
    /// Maximum concurrent child processes for batch evaluation.
    pub parallelism: usize,
    /// Per-evaluation wall-clock limit; `None` means unlimited.
    pub timeout: Option<Duration>,
}

impl ExternalSpec {
    pub fn new(exec_path: PathBuf) -> Self {
        Self {
            exec_path,
            parallelism: 1,
            timeout: None,
        }
    }
}

static RUN_COUNTER: AtomicU64 = AtomicU64::new(0);

fn next_run_id() -> String {
    let seq = RUN_COUNTER.fetch_add(1, Ordering::Relaxed);
    format!("hm-{}-{seq:08}", std::process::id())
}

/// Formats one native input value with 17 significant digits.
fn format_native(v: f64) -> String {
    format!("{v:.16e}")
}

/// Builds the single protocol input line (no trailing newline).
pub fn input_line(native: &[f64]) -> String {
    native
        .iter()
        .map(|&v| format_native(v))
        .collect::<Vec<_>>()
        .join(",")
}

pub(super) fn eval_external(
    spec: &ExternalSpec,
    x: &DesignPoint,
    native: &[f64],
    grid: &TimeGrid,
) -> Result<TimeSeries, SimError> {
    let xv = x.coords().to_vec();
    let mut child = Command::new(&spec.exec_path)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .env("HM_RUN_ID", next_run_id())
        .spawn()
        .map_err(|e| SimError::ProcessFailure {
            x: xv.clone(),
            message: format!("failed to start {}: {e}", spec.exec_path.display()),
        })?;

    // Feed the input line; a child that never reads stdin (e.g. a constant
    // mock) closes its end early, which shows up as a broken pipe we ignore.
    {
        let mut stdin = child.stdin.take().expect("stdin piped");
        let line = format!("{}\n", input_line(native));
        if let Err(e) = stdin.write_all(line.as_bytes()) {
            if e.kind() != std::io::ErrorKind::BrokenPipe {
                let _ = child.kill();
                let _ = child.wait();
                return Err(SimError::Io {
                    x: xv,
                    message: format!("writing child stdin: {e}"),
                });
            }
        }
    }

    // Drain stdout/stderr on helper threads so the child never blocks on a
    // full pipe while we wait for it.
    let mut stdout_pipe = child.stdout.take().expect("stdout piped");
    let mut stderr_pipe = child.stderr.take().expect("stderr piped");
    let out_reader = std::thread::spawn(move || {
        let mut buf = String::new();
        let _ = stdout_pipe.read_to_string(&mut buf);
        buf
    });
    let err_reader = std::thread::spawn(move || {
        let mut buf = String::new();
        let _ = stderr_pipe.read_to_string(&mut buf);
        buf
    });

    let status = match wait_with_timeout(&mut child, spec.timeout) {
        Ok(status) => status,
        Err(WaitError::TimedOut(seconds)) => {
            // Readers are left to drain on their own: a grandchild may hold
            // the pipe open past the kill, and waiting on it would turn a
            // timeout into a hang.
            drop(out_reader);
            drop(err_reader);
            return Err(SimError::Timeout { x: xv, seconds });
        }
        Err(WaitError::Io(e)) => {
            let _ = out_reader.join();
            let _ = err_reader.join();
            return Err(SimError::Io {
                x: xv,
                message: format!("waiting for child: {e}"),
            });
        }
    };

    let stdout = out_reader.join().unwrap_or_default();
    let stderr = err_reader.join().unwrap_or_default();

    if !status.success() {
        return Err(SimError::ProcessFailure {
            x: xv,
            message: format!(
                "exit status {}{}",
                status.code().map_or("killed".into(), |c| c.to_string()),
                if stderr.trim().is_empty() {
                    String::new()
                } else {
                    format!("; stderr: {}", stderr.trim())
                }
            ),
        });
    }

    parse_output(&stdout, &xv, grid)
}

fn parse_output(stdout: &str, x: &[f64], grid: &TimeGrid) -> Result<TimeSeries, SimError> {
    let lines: Vec<&str> = stdout.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    if lines.len() != grid.len() {
        return Err(SimError::MalformedOutput {
            x: x.to_vec(),
            message: format!("expected {} output lines, got {}", grid.len(), lines.len()),
        });
    }
    let mut values = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let v: f64 = line.parse().map_err(|_| SimError::MalformedOutput {
            x: x.to_vec(),
            message: format!("line {} is not a number: {line:?}", i + 1),
        })?;
        if !v.is_finite() {
            return Err(SimError::MalformedOutput {
                x: x.to_vec(),
                message: format!("line {} is not finite: {line:?}", i + 1),
            });
        }
        values.push(v);
    }
    Ok(TimeSeries::new(grid.clone(), values)?)
}

enum WaitError {
    TimedOut(u64),
    Io(std::io::Error),
}

fn wait_with_timeout(
    child: &mut Child,
    timeout: Option<Duration>,
) -> Result<std::process::ExitStatus, WaitError> {
    match timeout {
        None => child.wait().map_err(WaitError::Io),
        Some(limit) => {
            let start = Instant::now();
            loop {
                match child.try_wait() {
                    Ok(Some(status)) => return Ok(status),
                    Ok(None) => {
                        if start.elapsed() >= limit {
                            let _ = child.kill();
                            let _ = child.wait();
                            return Err(WaitError::TimedOut(limit.as_secs().max(1)));
                        }
                        std::thread::sleep(Duration::from_millis(2));
                    }
                    Err(e) => return Err(WaitError::Io(e)),
                }
            }
        }
    }
}

/// Evaluates a batch over up to `spec.parallelism` concurrent children.
/// Slot results are keyed by submission index, so the outcome is independent
/// of scheduling; the failure reported is always the lowest-index one.
pub(super) fn eval_batch(
    spec: &ExternalSpec,
    inputs: &[(DesignPoint, Vec<f64>)],
    grid: &TimeGrid,
) -> Result<Vec<TimeSeries>, SimError> {
    let workers = spec.parallelism.max(1).min(inputs.len().max(1));
    if workers <= 1 || inputs.len() <= 1 {
        return inputs
            .iter()
            .map(|(x, native)| eval_external(spec, x, native, grid))
            .collect();
    }

    let next = AtomicU64::new(0);
    let slots: Mutex<Vec<Option<Result<TimeSeries, SimError>>>> =
        Mutex::new(vec![None; inputs.len()]);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed) as usize;
                if i >= inputs.len() {
                    break;
                }
                let (x, native) = &inputs[i];
                let result = eval_external(spec, x, native, grid);
                slots.lock().expect("slot lock")[i] = Some(result);
            });
        }
    });

    let slots = slots.into_inner().expect("slot lock");
    slots
        .into_iter()
        .map(|slot| slot.expect("all slots filled"))
        .collect()
}
