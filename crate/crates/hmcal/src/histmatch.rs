//! The modified history-matching loop: discretize the target at a small set
//! of time points, fit one GP surrogate per point, screen a large random
//! test set by the implausibility criterion, evaluate the survivors, and
//! repeat until nothing plausible is left. The answer is the evaluated
//! point minimizing the full-series discrepancy — a best approximation is
//! always returned, never an empty set.

use std::collections::HashMap;

use crate::design::{self, DesignRole, DesignSet, Placement};
use crate::error::{ConfigError, HmError, SimError};
use crate::metrics;
use crate::rng::{derive_seed, Stream};
use crate::sim::{DesignPoint, SimulatorSpec, TimeSeries};
use crate::surrogate::{self, FitDiagnostics, FitOptions, Prediction, SurrogateModel};

/// How the discretization-point-set is chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DpsChoice {
    /// Verbatim 1-based time indices.
    Explicit(Vec<usize>),
    /// Equally spaced interior indices floor(j L / (tk + 1)), j = 1..tk.
    AutoFixed,
    /// One uniform draw per block of {1..L}, re-drawn from the run seed.
    AutoRandom,
}

/// Algorithmic parameters of one calibration run.
#[derive(Debug, Clone)]
pub struct HmConfig {
    /// Initial space-filling design size n1.
    pub n1: usize,
    /// Implausibility cutoff c; plausible means I_max <= c.
    pub cutoff: f64,
    /// Number of discretization time points.
    pub tk: usize,
    pub dps: DpsChoice,
    /// Screening test-set size M.
    pub test_set_size: usize,
    pub max_iterations: usize,
    /// Cap on total simulator evaluations.
    pub budget: usize,
    /// Optional cap on how many screened points are carried forward.
    pub subsample: Option<usize>,
    pub seed: u64,
    /// Keep every evaluated series in the result (turn off to store only
    /// the per-point discrepancy when memory matters).
    pub keep_series: bool,
    /// Restarts for the initial maximin design.
    pub design_restarts: usize,
    /// Surrogate fit controls (the per-fit seed field is overwritten).
    pub fit: FitOptions,
}

impl Default for HmConfig {
    fn default() -> Self {
        Self {
            n1: 10,
            cutoff: 3.0,
            tk: 2,
            dps: DpsChoice::AutoFixed,
            test_set_size: 5000,
            max_iterations: 20,
            budget: 1000,
            subsample: None,
            seed: 0,
            keep_series: true,
            design_restarts: 100,
            fit: FitOptions::default(),
        }
    }
}

impl HmConfig {
    pub fn validate(&self, l: usize) -> Result<(), ConfigError> {
        if self.n1 < 2 {
            return Err(ConfigError::InitialDesignTooSmall(self.n1));
        }
        if !(self.cutoff > 0.0) {
            return Err(ConfigError::NonPositiveCutoff(self.cutoff));
        }
        if self.tk < 1 || self.tk > l {
            return Err(ConfigError::BadTk { tk: self.tk, l });
        }
        if self.test_set_size < 1 {
            return Err(ConfigError::EmptyTestSet);
        }
        if self.max_iterations < 1 {
            return Err(ConfigError::NoIterations);
        }
        if let DpsChoice::Explicit(indices) = &self.dps {
            if indices.len() != self.tk {
                return Err(ConfigError::DpsLengthMismatch {
                    tk: self.tk,
                    got: indices.len(),
                });
            }
        }
        Ok(())
    }
}

/// Standardized distance between an emulator prediction and the target.
///
/// A zero-uncertainty prediction is either a perfect hit (0) or impossible
/// (+inf); otherwise the sd is floored at 1e-12 before dividing.
pub fn implausibility(pred: &Prediction, target: f64) -> f64 {
    let diff = (pred.mean - target).abs();
    if pred.sd == 0.0 {
        return if diff == 0.0 { 0.0 } else { f64::INFINITY };
    }
    diff / pred.sd.max(1e-12)
}

/// Combines per-coordinate implausibilities; a point must be plausible at
/// every discretization point at once.
pub fn i_max(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Screens a test set: keeps exactly the points with I_max <= c, in order.
pub fn screen(
    models: &[SurrogateModel],
    targets: &[f64],
    test_set: &DesignSet,
    cutoff: f64,
) -> DesignSet {
    let (flags, _) = screen_detailed(models, targets, test_set.points(), cutoff);
    DesignSet::new(
        test_set
            .points()
            .iter()
            .zip(&flags)
            .filter(|(_, &keep)| keep)
            .map(|(p, _)| p.clone())
            .collect(),
        test_set.dim(),
        DesignRole::PlausibleSubset,
    )
}

/// Screening with the per-point, per-coordinate implausibility matrix kept
/// around (the demo writes it out for plotting).
pub fn screen_detailed(
    models: &[SurrogateModel],
    targets: &[f64],
    points: &[DesignPoint],
    cutoff: f64,
) -> (Vec<bool>, Vec<Vec<f64>>) {
    assert_eq!(models.len(), targets.len());
    let per_model: Vec<Vec<Prediction>> = models
        .iter()
        .map(|m| m.predict_batch(points))
        .collect();
    let mut imat = vec![vec![0.0; models.len()]; points.len()];
    let mut flags = vec![false; points.len()];
    for (pi, flag) in flags.iter_mut().enumerate() {
        for (mi, preds) in per_model.iter().enumerate() {
            imat[pi][mi] = implausibility(&preds[pi], targets[mi]);
        }
        *flag = i_max(&imat[pi]) <= cutoff;
    }
    (flags, imat)
}

/// Resolves the configured DPS into concrete sorted 1-based indices.
pub fn resolve_dps(cfg: &HmConfig, l: usize) -> Result<Vec<usize>, ConfigError> {
    match &cfg.dps {
        DpsChoice::Explicit(indices) => {
            let mut out = indices.clone();
            for &ix in &out {
                if ix < 1 || ix > l {
                    return Err(ConfigError::DpsOutOfRange { index: ix, l });
                }
            }
            out.sort_unstable();
            for w in out.windows(2) {
                if w[0] == w[1] {
                    return Err(ConfigError::DpsDuplicate(w[0]));
                }
            }
            Ok(out)
        }
        DpsChoice::AutoFixed => {
            let out: Vec<usize> = (1..=cfg.tk).map(|j| (j * l) / (cfg.tk + 1)).collect();
            if out[0] < 1 || out.windows(2).any(|w| w[0] == w[1]) {
                return Err(ConfigError::DpsUnplaceable { tk: cfg.tk, l });
            }
            Ok(out)
        }
        DpsChoice::AutoRandom => Ok(design::variable_dps(
            cfg.tk,
            l,
            derive_seed(cfg.seed, Stream::Dps, 0),
        )),
    }
}

/// One simulator evaluation kept in the run log.
#[derive(Debug, Clone)]
pub struct EvaluatedPoint {
    pub point: DesignPoint,
    /// Full series if `keep_series` was set.
    pub series: Option<TimeSeries>,
    /// Simulator values at the DPS indices (always kept; surrogate training
    /// data).
    pub dps_values: Vec<f64>,
    /// Full-series discrepancy against the target.
    pub delta: f64,
    /// Batch index: 0 is the initial design, i >= 1 the i-th refinement.
    pub iteration: usize,
}

/// Per-iteration summary.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub iteration: usize,
    pub surrogates: Vec<FitDiagnostics>,
    /// Plausible points found by screening.
    pub screened: usize,
    /// Points actually evaluated after subsampling / budget truncation.
    pub carried: usize,
    pub cumulative_n: usize,
    pub best_delta: f64,
}

/// Why the loop stopped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Termination {
    /// No plausible candidate survived screening: converged.
    EmptyScreen,
    MaxIterations,
    BudgetExhausted,
    SimulatorFailure(String),
    SurrogateFailure(String),
}

/// Result of one calibration run.
#[derive(Debug, Clone)]
pub struct HmResult {
    pub x_opt: DesignPoint,
    pub delta_opt: f64,
    pub best_series: TimeSeries,
    /// Total distinct simulator evaluations.
    pub n_evaluations: usize,
    /// Resolved 1-based DPS indices.
    pub dps: Vec<usize>,
    pub traces: Vec<IterationTrace>,
    pub evaluations: Vec<EvaluatedPoint>,
    pub termination: Termination,
}

impl HmResult {
    pub fn log_delta_opt(&self) -> f64 {
        self.delta_opt.max(1e-300).ln()
    }
}

/// Per-iteration screening snapshot passed to an observer.
pub struct ScreeningSnapshot<'a> {
    pub iteration: usize,
    pub test_points: &'a [DesignPoint],
    /// `[point][dps coordinate]` implausibilities.
    pub implausibility: &'a [Vec<f64>],
    pub plausible: &'a [bool],
}

/// Runs the history-matching loop.
pub fn run(sim: &SimulatorSpec, target: &TimeSeries, cfg: &HmConfig) -> Result<HmResult, HmError> {
    run_observed(sim, target, cfg, &mut |_| {})
}

struct RunState<'a> {
    sim: &'a SimulatorSpec,
    target: &'a TimeSeries,
    cfg: &'a HmConfig,
    dps0: Vec<usize>, // 0-based DPS offsets
    evaluations: Vec<EvaluatedPoint>,
    seen: HashMap<Vec<u64>, usize>,
    best: Option<(usize, TimeSeries)>, // index of the best point + its series
}

impl<'a> RunState<'a> {
    /// Evaluates the not-yet-seen points of a batch (in parallel through the
    /// simulator backend), logging each result. On failure the successful
    /// prefix stays logged and the error is returned.
    fn evaluate_batch(&mut self, points: &[DesignPoint], iteration: usize) -> Result<(), SimError> {
        let fresh: Vec<DesignPoint> = {
            let mut batch_seen = std::collections::HashSet::new();
            points
                .iter()
                .filter(|p| !self.seen.contains_key(&p.bit_key()) && batch_seen.insert(p.bit_key()))
                .cloned()
                .collect()
        };
        if fresh.is_empty() {
            return Ok(());
        }
        match self.sim.evaluate_batch(&fresh) {
            Ok(series_list) => {
                for (p, s) in fresh.iter().zip(series_list) {
                    self.log_evaluation(p.clone(), s, iteration);
                }
                Ok(())
            }
            Err(_) => {
                // salvage point by point so the log keeps every success up
                // to the first failure
                for p in &fresh {
                    match self.sim.evaluate(p) {
                        Ok(s) => self.log_evaluation(p.clone(), s, iteration),
                        Err(e) => return Err(e),
                    }
                }
                Ok(())
            }
        }
    }

    fn log_evaluation(&mut self, point: DesignPoint, series: TimeSeries, iteration: usize) {
        let delta = metrics::delta(&series, self.target).expect("series share the grid");
        let dps_values: Vec<f64> = self.dps0.iter().map(|&i| series.values()[i]).collect();
        let index = self.evaluations.len();
        let improved = match &self.best {
            None => true,
            Some((bi, _)) => delta < self.evaluations[*bi].delta,
        };
        if improved {
            self.best = Some((index, series.clone()));
        }
        self.seen.insert(point.bit_key(), index);
        self.evaluations.push(EvaluatedPoint {
            point,
            series: if self.cfg.keep_series { Some(series) } else { None },
            dps_values,
            delta,
            iteration,
        });
    }

    fn best_delta(&self) -> f64 {
        self.best
            .as_ref()
            .map_or(f64::INFINITY, |(i, _)| self.evaluations[*i].delta)
    }

    fn finish(
        self,
        dps: Vec<usize>,
        traces: Vec<IterationTrace>,
        termination: Termination,
    ) -> Result<HmResult, HmError> {
        let (best_index, best_series) = match self.best {
            Some(b) => b,
            None => {
                let msg = match &termination {
                    Termination::SimulatorFailure(m) => m.clone(),
                    other => format!("{other:?}"),
                };
                return Err(HmError::NothingEvaluated(SimError::ProcessFailure {
                    x: vec![],
                    message: msg,
                }));
            }
        };
        let best = &self.evaluations[best_index];
        Ok(HmResult {
            x_opt: best.point.clone(),
            delta_opt: best.delta,
            best_series,
            n_evaluations: self.evaluations.len(),
            dps,
            traces,
            evaluations: self.evaluations,
            termination,
        })
    }
}

/// [`run`] with a per-iteration screening observer (used by the demo to
/// emit plot data).
pub fn run_observed(
    sim: &SimulatorSpec,
    target: &TimeSeries,
    cfg: &HmConfig,
    observe: &mut dyn FnMut(&ScreeningSnapshot),
) -> Result<HmResult, HmError> {
    let l = sim.grid.len();
    cfg.validate(l)?;
    if target.grid() != &sim.grid {
        return Err(HmError::Config(ConfigError::TargetGridMismatch));
    }
    let dps = resolve_dps(cfg, l)?;
    let dps0: Vec<usize> = dps.iter().map(|&i| i - 1).collect();
    let targets_at_dps: Vec<f64> = dps0.iter().map(|&i| target.values()[i]).collect();

    let mut state = RunState {
        sim,
        target,
        cfg,
        dps0,
        evaluations: Vec::new(),
        seen: HashMap::new(),
        best: None,
    };
    let mut traces: Vec<IterationTrace> = Vec::new();

    // Steps 2-3: initial maximin design, truncated if the budget is smaller.
    let initial = design::lhd_maximin(
        cfg.n1,
        sim.d,
        derive_seed(cfg.seed, Stream::InitialDesign, 0),
        cfg.design_restarts.max(1),
        Placement::Jittered,
    );
    let mut initial_points = initial.into_points();
    initial_points.truncate(cfg.budget);
    if let Err(e) = state.evaluate_batch(&initial_points, 0) {
        let message = e.to_string();
        return state.finish(dps, traces, Termination::SimulatorFailure(message));
    }
    if state.evaluations.len() >= cfg.budget {
        return state.finish(dps, traces, Termination::BudgetExhausted);
    }

    let fit_template = cfg.fit.clone();
    let mut previous_theta: Vec<Option<Vec<f64>>> = vec![None; state.dps0.len()];
    let mut iteration = 1usize;
    loop {
        if iteration > cfg.max_iterations {
            return state.finish(dps, traces, Termination::MaxIterations);
        }

        // Step 4: one scalar surrogate per DPS coordinate, fitted on every
        // point evaluated so far. Fits run concurrently.
        let train_x: Vec<DesignPoint> =
            state.evaluations.iter().map(|e| e.point.clone()).collect();
        let fits: Vec<Result<SurrogateModel, _>> = {
            use rayon::prelude::*;
            let previous = &previous_theta;
            (0..state.dps0.len())
                .into_par_iter()
                .map(|j| {
                    let y: Vec<f64> = state.evaluations.iter().map(|e| e.dps_values[j]).collect();
                    let opts = FitOptions {
                        seed: derive_seed(
                            cfg.seed,
                            Stream::FitStarts,
                            ((iteration as u64) << 32) | j as u64,
                        ),
                        warm_starts: previous[j].iter().cloned().collect(),
                        ..fit_template.clone()
                    };
                    surrogate::fit(&train_x, &y, &opts)
                })
                .collect()
        };
        let mut models = Vec::with_capacity(fits.len());
        for f in fits {
            match f {
                Ok(m) => models.push(m),
                Err(e) => {
                    return state.finish(dps, traces, Termination::SurrogateFailure(e.to_string()))
                }
            }
        }
        for (slot, m) in previous_theta.iter_mut().zip(&models) {
            *slot = Some(m.theta().log10_lengthscales.clone());
        }
        let diagnostics: Vec<FitDiagnostics> = models.iter().map(|m| m.diagnostics()).collect();

        // Step 5: screen a fresh random test set.
        let test_set = design::random_test_set(
            cfg.test_set_size,
            sim.d,
            derive_seed(cfg.seed, Stream::TestSet, iteration as u64),
        );
        let (flags, imat) =
            screen_detailed(&models, &targets_at_dps, test_set.points(), cfg.cutoff);
        observe(&ScreeningSnapshot {
            iteration,
            test_points: test_set.points(),
            implausibility: &imat,
            plausible: &flags,
        });
        let survivors: Vec<DesignPoint> = test_set
            .points()
            .iter()
            .zip(&flags)
            .filter(|(_, &keep)| keep)
            .map(|(p, _)| p.clone())
            .collect();
        let screened = survivors.len();

        // Step 6: empty screen terminates; otherwise evaluate the carried
        // subset and iterate.
        if screened == 0 {
            traces.push(IterationTrace {
                iteration,
                surrogates: diagnostics,
                screened,
                carried: 0,
                cumulative_n: state.evaluations.len(),
                best_delta: state.best_delta(),
            });
            return state.finish(dps, traces, Termination::EmptyScreen);
        }

        let mut carried = match cfg.subsample {
            Some(cap) if screened > cap => {
                let set = DesignSet::new(survivors, sim.d, DesignRole::PlausibleSubset);
                design::maximin_subset(&set, cap).into_points()
            }
            _ => survivors,
        };
        let remaining = cfg.budget - state.evaluations.len();
        let budget_hit = carried.len() >= remaining;
        carried.truncate(remaining);
        let carried_count = carried.len();

        let eval_outcome = state.evaluate_batch(&carried, iteration);
        traces.push(IterationTrace {
            iteration,
            surrogates: diagnostics,
            screened,
            carried: carried_count,
            cumulative_n: state.evaluations.len(),
            best_delta: state.best_delta(),
        });
        if let Err(e) = eval_outcome {
            let message = e.to_string();
            return state.finish(dps, traces, Termination::SimulatorFailure(message));
        }
        if budget_hit {
            return state.finish(dps, traces, Termination::BudgetExhausted);
        }
        iteration += 1;
    }
}
