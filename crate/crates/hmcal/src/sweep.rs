//! Sensitivity-study harness: replicated calibration runs over factor grids
//! of (n1, c, tk, M), plus the paired fixed-vs-variable DPS comparison.
//!
//! Cells and replicates are independent jobs executed in parallel; every
//! job derives its own seed from `(base seed, cell index, replicate)`, so a
//! sweep is reproducible row by row no matter the worker count. Rows are
//! committed to the caller's sink in job order as they complete.

use std::collections::BTreeMap;
use std::sync::mpsc;

use rayon::prelude::*;

use crate::histmatch::{self, DpsChoice, HmConfig, Termination};
use crate::rng::{derive_seed, Stream};
use crate::sim::SimulatorSpec;
use crate::sim::TimeSeries;

/// DPS handling across a sweep: a deterministic interior grid, or a fresh
/// random draw per replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepDpsMode {
    Fixed,
    Variable,
}

/// Factor grid and replication plan.
#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub n1_levels: Vec<usize>,
    pub c_levels: Vec<f64>,
    pub tk_levels: Vec<usize>,
    pub m_levels: Vec<usize>,
    pub dps_mode: SweepDpsMode,
    pub replications: usize,
    pub base_seed: u64,
    /// Template for the non-factor parameters (caps, subsampling).
    pub base: HmConfig,
}

impl SweepPlan {
    /// The §-style default study grid at desk-scale replication.
    pub fn default_grid(base_seed: u64) -> Self {
        Self {
            n1_levels: vec![5, 10, 20],
            c_levels: vec![1.0, 2.0, 3.0],
            tk_levels: vec![2, 4, 8],
            m_levels: vec![500, 2000, 5000],
            dps_mode: SweepDpsMode::Variable,
            replications: 25,
            base_seed,
            base: HmConfig {
                keep_series: false,
                ..HmConfig::default()
            },
        }
    }

    pub fn cell_count(&self) -> usize {
        self.n1_levels.len() * self.c_levels.len() * self.tk_levels.len() * self.m_levels.len()
    }

    /// Cells in declaration order: n1 outermost, then c, tk, M innermost.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::with_capacity(self.cell_count());
        let mut index = 0;
        for &n1 in &self.n1_levels {
            for &c in &self.c_levels {
                for &tk in &self.tk_levels {
                    for &m in &self.m_levels {
                        out.push(Cell { index, n1, c, tk, m });
                        index += 1;
                    }
                }
            }
        }
        out
    }
}

/// One factor combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub n1: usize,
    pub c: f64,
    pub tk: usize,
    pub m: usize,
}

/// Outcome of a single replicate.
#[derive(Debug, Clone)]
pub struct ReplicateRow {
    pub cell: Cell,
    pub replicate: usize,
    pub seed: u64,
    pub log_delta: f64,
    pub n_evaluations: usize,
    pub iterations: usize,
    pub exact_hit: bool,
    /// Termination label, or `failed: ...` when the run aborted.
    pub status: String,
    pub ok: bool,
}

/// Per-cell aggregates over the successful replicates.
#[derive(Debug, Clone)]
pub struct CellSummary {
    pub cell: Cell,
    pub replicates: usize,
    pub failures: usize,
    pub exact_hits: usize,
    pub median_log_delta: f64,
    pub mean_log_delta: f64,
    pub median_n: f64,
}

/// Raw rows plus aggregates; every aggregate is recomputable from the rows.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub plan_levels: PlanLevels,
    pub rows: Vec<ReplicateRow>,
    pub cells: Vec<CellSummary>,
}

#[derive(Debug, Clone)]
pub struct PlanLevels {
    pub n1: Vec<usize>,
    pub c: Vec<f64>,
    pub tk: Vec<usize>,
    pub m: Vec<usize>,
}

/// Median of a slice (mean of the middle two on even lengths); NaN when
/// empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn termination_label(t: &Termination) -> (String, bool) {
    match t {
        Termination::EmptyScreen => ("empty_screen".into(), true),
        Termination::MaxIterations => ("max_iterations".into(), true),
        Termination::BudgetExhausted => ("budget_exhausted".into(), true),
        Termination::SimulatorFailure(m) => (format!("failed: simulator: {m}"), false),
        Termination::SurrogateFailure(m) => (format!("failed: surrogate: {m}"), false),
    }
}

/// Seed for one replicate of one cell; documented derivation so any row of
/// `sweep_raw.csv` can be reproduced as a standalone run.
pub fn replicate_seed(base_seed: u64, cell_index: usize, replicate: usize) -> u64 {
    derive_seed(
        base_seed,
        Stream::SweepReplicate,
        ((cell_index as u64) << 32) | replicate as u64,
    )
}

fn run_replicate(
    sim: &SimulatorSpec,
    target: &TimeSeries,
    plan: &SweepPlan,
    cell: Cell,
    replicate: usize,
) -> ReplicateRow {
    let seed = replicate_seed(plan.base_seed, cell.index, replicate);
    let cfg = HmConfig {
        n1: cell.n1,
        cutoff: cell.c,
        tk: cell.tk,
        test_set_size: cell.m,
        dps: match plan.dps_mode {
            SweepDpsMode::Fixed => DpsChoice::AutoFixed,
            SweepDpsMode::Variable => DpsChoice::AutoRandom,
        },
        seed,
        keep_series: false,
        ..plan.base.clone()
    };
    match histmatch::run(sim, target, &cfg) {
        Ok(result) => {
            let (status, ok) = termination_label(&result.termination);
            ReplicateRow {
                cell,
                replicate,
                seed,
                log_delta: result.log_delta_opt(),
                n_evaluations: result.n_evaluations,
                iterations: result.traces.len(),
                exact_hit: result.delta_opt == 0.0,
                status,
                ok,
            }
        }
        Err(e) => ReplicateRow {
            cell,
            replicate,
            seed,
            log_delta: f64::NAN,
            n_evaluations: 0,
            iterations: 0,
            exact_hit: false,
            status: format!("failed: {e}"),
            ok: false,
        },
    }
}

fn summarize(plan: &SweepPlan, rows: &[ReplicateRow]) -> Vec<CellSummary> {
    plan.cells()
        .into_iter()
        .map(|cell| {
            let cell_rows: Vec<&ReplicateRow> =
                rows.iter().filter(|r| r.cell.index == cell.index).collect();
            let good: Vec<&&ReplicateRow> = cell_rows.iter().filter(|r| r.ok).collect();
            let log_deltas: Vec<f64> = good.iter().map(|r| r.log_delta).collect();
            let ns: Vec<f64> = good.iter().map(|r| r.n_evaluations as f64).collect();
            CellSummary {
                cell,
                replicates: cell_rows.len(),
                failures: cell_rows.len() - good.len(),
                exact_hits: good.iter().filter(|r| r.exact_hit).count(),
                median_log_delta: median(&log_deltas),
                mean_log_delta: if log_deltas.is_empty() {
                    f64::NAN
                } else {
                    log_deltas.iter().sum::<f64>() / log_deltas.len() as f64
                },
                median_n: median(&ns),
            }
        })
        .collect()
}

/// Runs every (cell, replicate) job. `sink` sees each row exactly once, in
/// job order, as soon as all earlier rows have been committed — so an
/// aborted sweep leaves a valid prefix behind.
pub fn run_sweep(
    sim: &SimulatorSpec,
    target: &TimeSeries,
    plan: &SweepPlan,
    sink: &mut (dyn FnMut(&ReplicateRow) + Send),
) -> SweepResult {
    let cells = plan.cells();
    let jobs: Vec<(usize, Cell, usize)> = cells
        .iter()
        .flat_map(|&cell| {
            (0..plan.replications).map(move |rep| (cell.index * plan.replications + rep, cell, rep))
        })
        .collect();

    let (tx, rx) = mpsc::channel::<(usize, ReplicateRow)>();
    let n_jobs = jobs.len();
    let rows: Vec<ReplicateRow> = std::thread::scope(|scope| {
        let consumer = scope.spawn(move || {
            let mut pending: BTreeMap<usize, ReplicateRow> = BTreeMap::new();
            let mut committed: Vec<ReplicateRow> = Vec::with_capacity(n_jobs);
            for (order, row) in rx {
                pending.insert(order, row);
                while let Some(row) = pending.remove(&committed.len()) {
                    sink(&row);
                    committed.push(row);
                }
            }
            committed
        });
        jobs.par_iter().for_each_with(tx, |tx, &(order, cell, rep)| {
            let row = run_replicate(sim, target, plan, cell, rep);
            let _ = tx.send((order, row));
        });
        consumer.join().expect("sweep consumer thread")
    });

    let cells_summary = summarize(plan, &rows);
    SweepResult {
        plan_levels: PlanLevels {
            n1: plan.n1_levels.clone(),
            c: plan.c_levels.clone(),
            tk: plan.tk_levels.clone(),
            m: plan.m_levels.clone(),
        },
        rows,
        cells: cells_summary,
    }
}

/// A sweep factor, for marginal tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    N1,
    C,
    Tk,
    M,
}

impl Factor {
    pub fn name(&self) -> &'static str {
        match self {
            Factor::N1 => "n1",
            Factor::C => "c",
            Factor::Tk => "tk",
            Factor::M => "m",
        }
    }

    fn levels(&self, levels: &PlanLevels) -> Vec<f64> {
        match self {
            Factor::N1 => levels.n1.iter().map(|&v| v as f64).collect(),
            Factor::C => levels.c.clone(),
            Factor::Tk => levels.tk.iter().map(|&v| v as f64).collect(),
            Factor::M => levels.m.iter().map(|&v| v as f64).collect(),
        }
    }

    fn value(&self, cell: &Cell) -> f64 {
        match self {
            Factor::N1 => cell.n1 as f64,
            Factor::C => cell.c,
            Factor::Tk => cell.tk as f64,
            Factor::M => cell.m as f64,
        }
    }
}

/// One row of a two-factor marginal table.
#[derive(Debug, Clone, Copy)]
pub struct MarginalRow {
    pub a: f64,
    pub b: f64,
    /// Median over the per-cell medians collapsed over the other factors.
    pub median_log_delta: f64,
    pub cells: usize,
}

/// Collapses the sweep onto a factor pair: for each (a, b) level pair, the
/// median of the per-cell medians over the remaining factors.
pub fn marginal_medians(result: &SweepResult, a: Factor, b: Factor) -> Vec<MarginalRow> {
    assert_ne!(a, b, "marginal factors must differ");
    let mut out = Vec::new();
    for &la in &a.levels(&result.plan_levels) {
        for &lb in &b.levels(&result.plan_levels) {
            let medians: Vec<f64> = result
                .cells
                .iter()
                .filter(|c| a.value(&c.cell) == la && b.value(&c.cell) == lb)
                .map(|c| c.median_log_delta)
                .filter(|v| v.is_finite())
                .collect();
            out.push(MarginalRow {
                a: la,
                b: lb,
                median_log_delta: median(&medians),
                cells: medians.len(),
            });
        }
    }
    out
}

/// One replicate of the paired fixed-vs-variable DPS comparison.
#[derive(Debug, Clone)]
pub struct DpsPairRow {
    pub replicate: usize,
    pub seed: u64,
    pub fixed_n: usize,
    pub fixed_log_delta: f64,
    pub fixed_ok: bool,
    pub variable_n: usize,
    pub variable_log_delta: f64,
    pub variable_ok: bool,
    pub variable_dps: Vec<usize>,
}

/// Paired-run comparison result.
#[derive(Debug, Clone)]
pub struct DpsComparison {
    pub tk: usize,
    pub rows: Vec<DpsPairRow>,
}

impl DpsComparison {
    pub fn median_fixed_n(&self) -> f64 {
        median(&self.rows.iter().filter(|r| r.fixed_ok).map(|r| r.fixed_n as f64).collect::<Vec<_>>())
    }

    pub fn median_variable_n(&self) -> f64 {
        median(&self.rows.iter().filter(|r| r.variable_ok).map(|r| r.variable_n as f64).collect::<Vec<_>>())
    }

    pub fn median_fixed_log_delta(&self) -> f64 {
        median(&self.rows.iter().filter(|r| r.fixed_ok).map(|r| r.fixed_log_delta).collect::<Vec<_>>())
    }

    pub fn median_variable_log_delta(&self) -> f64 {
        median(&self.rows.iter().filter(|r| r.variable_ok).map(|r| r.variable_log_delta).collect::<Vec<_>>())
    }
}

/// Runs R paired replicates: fixed interior DPS vs a per-replicate random
/// DPS, sharing the replicate seed (hence the initial design and all test
/// sets) within each pair.
pub fn dps_comparison(
    sim: &SimulatorSpec,
    target: &TimeSeries,
    tk: usize,
    replications: usize,
    base_seed: u64,
    base: &HmConfig,
) -> DpsComparison {
    let rows: Vec<DpsPairRow> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let seed = derive_seed(base_seed, Stream::SweepReplicate, rep as u64);
            let make = |dps: DpsChoice| HmConfig {
                tk,
                dps,
                seed,
                keep_series: false,
                ..base.clone()
            };
            let fixed = histmatch::run(sim, target, &make(DpsChoice::AutoFixed));
            let variable = histmatch::run(sim, target, &make(DpsChoice::AutoRandom));
            let (fixed_n, fixed_log_delta, fixed_ok) = match &fixed {
                Ok(r) => (
                    r.n_evaluations,
                    r.log_delta_opt(),
                    termination_label(&r.termination).1,
                ),
                Err(_) => (0, f64::NAN, false),
            };
            let (variable_n, variable_log_delta, variable_ok, variable_dps) = match &variable {
                Ok(r) => (
                    r.n_evaluations,
                    r.log_delta_opt(),
                    termination_label(&r.termination).1,
                    r.dps.clone(),
                ),
                Err(_) => (0, f64::NAN, false, Vec::new()),
            };
            DpsPairRow {
                replicate: rep,
                seed,
                fixed_n,
                fixed_log_delta,
                fixed_ok,
                variable_n,
                variable_log_delta,
                variable_ok,
                variable_dps,
            }
        })
        .collect();
    DpsComparison { tk, rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::DesignPoint;

    fn small_sim_and_target() -> (SimulatorSpec, TimeSeries) {
        let sim = SimulatorSpec::builtin();
        let x0 = DesignPoint::new(vec![0.5, 0.5]).unwrap();
        let target = sim.evaluate(&x0).unwrap();
        (sim, target)
    }

    fn tiny_plan(seed: u64) -> SweepPlan {
        SweepPlan {
            n1_levels: vec![6],
            c_levels: vec![3.0],
            tk_levels: vec![2],
            m_levels: vec![150],
            dps_mode: SweepDpsMode::Variable,
            replications: 2,
            base_seed: seed,
            base: HmConfig {
                keep_series: false,
                max_iterations: 4,
                budget: 200,
                ..HmConfig::default()
            },
        }
    }

    #[test]
    fn median_helper() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn single_cell_single_rep_matches_direct_run() {
        let (sim, target) = small_sim_and_target();
        let mut plan = tiny_plan(21);
        plan.replications = 1;
        let result = run_sweep(&sim, &target, &plan, &mut |_| {});
        assert_eq!(result.rows.len(), 1);
        let row = &result.rows[0];
        // the same run done directly
        let cfg = HmConfig {
            n1: 6,
            cutoff: 3.0,
            tk: 2,
            test_set_size: 150,
            dps: DpsChoice::AutoRandom,
            seed: replicate_seed(21, 0, 0),
            keep_series: false,
            max_iterations: 4,
            budget: 200,
            ..HmConfig::default()
        };
        let direct = histmatch::run(&sim, &target, &cfg).unwrap();
        assert_eq!(row.n_evaluations, direct.n_evaluations);
        assert_eq!(row.log_delta, direct.log_delta_opt());
    }

    #[test]
    fn sweep_is_deterministic_and_ordered() {
        let (sim, target) = small_sim_and_target();
        let plan = tiny_plan(22);
        let mut seen_a = Vec::new();
        let a = run_sweep(&sim, &target, &plan, &mut |r| seen_a.push(r.replicate));
        let b = run_sweep(&sim, &target, &plan, &mut |_| {});
        assert_eq!(seen_a, vec![0, 1]);
        assert_eq!(a.rows.len(), b.rows.len());
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.seed, rb.seed);
            assert_eq!(ra.log_delta, rb.log_delta);
            assert_eq!(ra.n_evaluations, rb.n_evaluations);
        }
        // aggregates recomputable from raw rows
        let again = summarize(&plan, &a.rows);
        for (ca, cb) in a.cells.iter().zip(&again) {
            assert_eq!(ca.median_log_delta.to_bits(), cb.median_log_delta.to_bits());
            assert_eq!(ca.median_n.to_bits(), cb.median_n.to_bits());
        }
    }

    #[test]
    fn marginal_medians_hand_case() {
        // hand-built result: 2 n1 levels x 2 m levels, one c, one tk
        let mk_cell = |index, n1, m| Cell {
            index,
            n1,
            c: 3.0,
            tk: 2,
            m,
        };
        let cells = vec![
            (mk_cell(0, 5, 100), -1.0),
            (mk_cell(1, 5, 200), -2.0),
            (mk_cell(2, 10, 100), -3.0),
            (mk_cell(3, 10, 200), -4.0),
        ];
        let result = SweepResult {
            plan_levels: PlanLevels {
                n1: vec![5, 10],
                c: vec![3.0],
                tk: vec![2],
                m: vec![100, 200],
            },
            rows: Vec::new(),
            cells: cells
                .into_iter()
                .map(|(cell, med)| CellSummary {
                    cell,
                    replicates: 1,
                    failures: 0,
                    exact_hits: 0,
                    median_log_delta: med,
                    mean_log_delta: med,
                    median_n: 10.0,
                })
                .collect(),
        };
        let table = marginal_medians(&result, Factor::N1, Factor::M);
        assert_eq!(table.len(), 4);
        // each (n1, m) pair has exactly one cell, so the marginal equals it
        assert_eq!(table[0].median_log_delta, -1.0);
        assert_eq!(table[3].median_log_delta, -4.0);
        // collapsing over m instead
        let table = marginal_medians(&result, Factor::N1, Factor::C);
        assert_eq!(table.len(), 2);
        assert_eq!(table[0].median_log_delta, -1.5); // median(-1, -2)
        assert_eq!(table[1].median_log_delta, -3.5); // median(-3, -4)
    }

    #[test]
    fn paired_dps_runs_share_initial_design() {
        let (sim, target) = small_sim_and_target();
        let base = HmConfig {
            n1: 6,
            test_set_size: 120,
            max_iterations: 3,
            budget: 150,
            keep_series: false,
            ..HmConfig::default()
        };
        let cmp = dps_comparison(&sim, &target, 2, 2, 33, &base);
        assert_eq!(cmp.rows.len(), 2);
        for row in &cmp.rows {
            // re-run both arms directly and compare their initial designs
            let make = |dps: DpsChoice| HmConfig {
                tk: 2,
                dps,
                seed: row.seed,
                ..base.clone()
            };
            let fixed = histmatch::run(&sim, &target, &make(DpsChoice::AutoFixed)).unwrap();
            let variable = histmatch::run(&sim, &target, &make(DpsChoice::AutoRandom)).unwrap();
            assert_eq!(fixed.dps, vec![33, 67]);
            assert_eq!(variable.dps, row.variable_dps);
            let d1_fixed: Vec<&DesignPoint> = fixed
                .evaluations
                .iter()
                .filter(|e| e.iteration == 0)
                .map(|e| &e.point)
                .collect();
            let d1_var: Vec<&DesignPoint> = variable
                .evaluations
                .iter()
                .filter(|e| e.iteration == 0)
                .map(|e| &e.point)
                .collect();
            assert_eq!(d1_fixed.len(), d1_var.len());
            for (a, b) in d1_fixed.iter().zip(&d1_var) {
                assert_eq!(a.coords(), b.coords());
            }
        }
    }

    #[test]
    fn variable_dps_differs_across_replicates() {
        let (sim, target) = small_sim_and_target();
        let base = HmConfig {
            n1: 5,
            test_set_size: 60,
            max_iterations: 2,
            budget: 80,
            keep_series: false,
            ..HmConfig::default()
        };
        let cmp = dps_comparison(&sim, &target, 2, 20, 44, &base);
        let distinct: std::collections::HashSet<Vec<usize>> =
            cmp.rows.iter().map(|r| r.variable_dps.clone()).collect();
        assert!(distinct.len() > 1, "random DPS never varied");
    }
}
