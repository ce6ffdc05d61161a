//! Plot-ready CSV output: run bundles, sweep tables, metric reports.
//!
//! Numbers are written in their shortest round-trip form (UTF-8, LF line
//! endings), so re-parsing a file reproduces the in-memory values exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::histmatch::HmResult;
use crate::metrics::{FitReport, MetricResult};
use crate::sim::{DesignPoint, InputBounds, TimeSeries};
use crate::sweep::{DpsComparison, MarginalRow, ReplicateRow, SweepResult};

/// Shortest round-trip decimal; scientific notation outside a sane window
/// so a 1e-300 discrepancy does not print three hundred zeros.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 1e-4 && v.abs() < 1e16) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn fmt_metric(m: &MetricResult) -> String {
    match m {
        Ok(v) => fmt_f64(*v),
        Err(_) => String::new(),
    }
}

fn create(path: &Path) -> std::io::Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// `runs.csv`: one row per simulator evaluation, in evaluation order.
pub fn write_runs_csv(path: &Path, result: &HmResult, names: &[String]) -> std::io::Result<()> {
    let mut w = create(path)?;
    write!(w, "iteration")?;
    for name in names {
        write!(w, ",{name}")?;
    }
    writeln!(w, ",delta")?;
    for e in &result.evaluations {
        write!(w, "{}", e.iteration)?;
        for c in e.point.coords() {
            write!(w, ",{}", fmt_f64(*c))?;
        }
        writeln!(w, ",{}", fmt_f64(e.delta))?;
    }
    w.flush()
}

/// `trace.csv`: per-iteration progress.
pub fn write_trace_csv(path: &Path, result: &HmResult) -> std::io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "iteration,screened,carried,cumulative_n,best_delta")?;
    for t in &result.traces {
        writeln!(
            w,
            "{},{},{},{},{}",
            t.iteration,
            t.screened,
            t.carried,
            t.cumulative_n,
            fmt_f64(t.best_delta)
        )?;
    }
    w.flush()
}

/// `best.csv`: the winning input (scaled and native units, constant
/// columns) alongside the winning series and the target, per time step.
pub fn write_best_csv(
    path: &Path,
    result: &HmResult,
    target: &TimeSeries,
    bounds: &InputBounds,
) -> std::io::Result<()> {
    let mut w = create(path)?;
    let native = bounds.descale(&result.x_opt);
    write!(w, "t,target,best")?;
    for name in bounds.names() {
        write!(w, ",{name}_scaled")?;
    }
    for name in bounds.names() {
        write!(w, ",{name}_native")?;
    }
    writeln!(w)?;
    for i in 0..target.len() {
        write!(
            w,
            "{},{},{}",
            fmt_f64(target.grid().values()[i]),
            fmt_f64(target.values()[i]),
            fmt_f64(result.best_series.values()[i])
        )?;
        for c in result.x_opt.coords() {
            write!(w, ",{}", fmt_f64(*c))?;
        }
        for v in &native {
            write!(w, ",{}", fmt_f64(*v))?;
        }
        writeln!(w)?;
    }
    w.flush()
}

/// `metrics.csv`: one row per labelled candidate; undefined metrics are
/// empty cells.
pub fn write_metrics_csv(path: &Path, rows: &[(String, FitReport)]) -> std::io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "label,delta,rmse,r2,nse,ppts_5_95,ppts_1_100")?;
    for (label, r) in rows {
        writeln!(
            w,
            "{label},{},{},{},{},{},{}",
            fmt_metric(&r.delta),
            fmt_metric(&r.rmse),
            fmt_metric(&r.r2),
            fmt_metric(&r.nse),
            fmt_metric(&r.ppts_5_95),
            fmt_metric(&r.ppts_1_100)
        )?;
    }
    w.flush()
}

/// Design export: header of coordinate names, one point per row.
pub fn write_design_csv(
    path: &Path,
    points: &[DesignPoint],
    names: &[String],
) -> std::io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", names.join(","))?;
    for p in points {
        let row: Vec<String> = p.coords().iter().map(|&c| fmt_f64(c)).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()
}

pub fn sweep_raw_header() -> &'static str {
    "cell,n1,c,tk,m,replicate,seed,log_delta,n,iterations,exact_hit,status"
}

pub fn sweep_raw_line(r: &ReplicateRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        r.cell.index,
        r.cell.n1,
        fmt_f64(r.cell.c),
        r.cell.tk,
        r.cell.m,
        r.replicate,
        r.seed,
        fmt_f64(r.log_delta),
        r.n_evaluations,
        r.iterations,
        r.exact_hit,
        r.status.replace(',', ";")
    )
}

/// `sweep_raw.csv` written in one go (the CLI streams it instead).
pub fn write_sweep_raw(path: &Path, result: &SweepResult) -> std::io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", sweep_raw_header())?;
    for r in &result.rows {
        writeln!(w, "{}", sweep_raw_line(r))?;
    }
    w.flush()
}

/// `sweep_medians.csv`: per-cell aggregates.
pub fn write_sweep_medians(path: &Path, result: &SweepResult) -> std::io::Result<()> {
    let mut w = create(path)?;
    writeln!(
        w,
        "cell,n1,c,tk,m,replicates,failures,exact_hits,median_log_delta,mean_log_delta,median_n"
    )?;
    for c in &result.cells {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            c.cell.index,
            c.cell.n1,
            fmt_f64(c.cell.c),
            c.cell.tk,
            c.cell.m,
            c.replicates,
            c.failures,
            c.exact_hits,
            fmt_f64(c.median_log_delta),
            fmt_f64(c.mean_log_delta),
            fmt_f64(c.median_n)
        )?;
    }
    w.flush()
}

/// `fig5_<a>_<b>.csv`: one marginal two-factor table.
pub fn write_marginal_csv(
    path: &Path,
    a_name: &str,
    b_name: &str,
    table: &[MarginalRow],
) -> std::io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{a_name},{b_name},median_log_delta,cells")?;
    for row in table {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_f64(row.a),
            fmt_f64(row.b),
            fmt_f64(row.median_log_delta),
            row.cells
        )?;
    }
    w.flush()
}

/// `fig6_dps.csv`: paired fixed/variable DPS outcomes per replicate.
pub fn write_dps_comparison_csv(path: &Path, cmp: &DpsComparison) -> std::io::Result<()> {
    let mut w = create(path)?;
    writeln!(
        w,
        "replicate,seed,fixed_n,fixed_log_n,fixed_log_delta,variable_n,variable_log_n,variable_log_delta,variable_dps"
    )?;
    for r in &cmp.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.replicate,
            r.seed,
            r.fixed_n,
            fmt_f64((r.fixed_n.max(1) as f64).ln()),
            fmt_f64(r.fixed_log_delta),
            r.variable_n,
            fmt_f64((r.variable_n.max(1) as f64).ln()),
            fmt_f64(r.variable_log_delta),
            r.variable_dps
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(";")
        )?;
    }
    w.flush()
}

/// Writes `runs.csv`, `trace.csv` and `best.csv` into `dir`.
pub fn write_run_bundle(
    dir: &Path,
    result: &HmResult,
    target: &TimeSeries,
    bounds: &InputBounds,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    write_runs_csv(&dir.join("runs.csv"), result, bounds.names())?;
    write_trace_csv(&dir.join("trace.csv"), result)?;
    write_best_csv(&dir.join("best.csv"), result, target, bounds)?;
    Ok(())
}
