//! Goodness-of-fit statistics between a candidate series and the target:
//! L2 discrepancy, RMSE, R^2, Nash-Sutcliffe efficiency and the peak
//! percent threshold statistic.

use crate::error::MetricError;
use crate::sim::TimeSeries;

/// Result of one metric; errors are carried per-field so a report can be
/// partially defined (e.g. PPTS undefined on an all-zero candidate).
pub type MetricResult = Result<f64, MetricError>;

/// All metrics for one candidate/target pair.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub delta: MetricResult,
    pub rmse: MetricResult,
    pub r2: MetricResult,
    pub nse: MetricResult,
    pub ppts_5_95: MetricResult,
    pub ppts_1_100: MetricResult,
}

fn check_grids(g: &TimeSeries, g0: &TimeSeries) -> Result<(), MetricError> {
    if g.same_grid(g0) {
        Ok(())
    } else {
        Err(MetricError::GridMismatch)
    }
}

/// Euclidean discrepancy ||g - g0||_2 over the full series.
pub fn delta(g: &TimeSeries, g0: &TimeSeries) -> MetricResult {
    check_grids(g, g0)?;
    Ok(g.values()
        .iter()
        .zip(g0.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Root mean squared error; equals `delta / sqrt(L)`.
pub fn rmse(g: &TimeSeries, g0: &TimeSeries) -> MetricResult {
    check_grids(g, g0)?;
    let l = g.len() as f64;
    Ok((g.values()
        .iter()
        .zip(g0.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / l)
        .sqrt())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// R^2 of the ordinary least squares regression of the target on the
/// candidate (intercept and slope fitted); equals the squared Pearson
/// correlation. Undefined when either series is constant.
pub fn r2(g: &TimeSeries, g0: &TimeSeries) -> MetricResult {
    check_grids(g, g0)?;
    let gm = mean(g.values());
    let g0m = mean(g0.values());
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in g.values().iter().zip(g0.values()) {
        sxx += (a - gm) * (a - gm);
        syy += (b - g0m) * (b - g0m);
        sxy += (a - gm) * (b - g0m);
    }
    if sxx == 0.0 {
        return Err(MetricError::ConstantCandidate);
    }
    if syy == 0.0 {
        return Err(MetricError::ConstantTarget);
    }
    Ok((sxy * sxy) / (sxx * syy))
}

/// R^2 of the fixed-slope-1 model `g0 = g + error`; algebraically identical
/// to [`nse`]. Exposed because "simple linear regression" can be read either
/// way; the conventional OLS variant is [`r2`].
pub fn r2_identity(g: &TimeSeries, g0: &TimeSeries) -> MetricResult {
    nse(g, g0)
}

/// Nash-Sutcliffe efficiency: 1 - SSE / SST against the target mean.
pub fn nse(g: &TimeSeries, g0: &TimeSeries) -> MetricResult {
    check_grids(g, g0)?;
    let g0m = mean(g0.values());
    let sse: f64 = g
        .values()
        .iter()
        .zip(g0.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let sst: f64 = g0.values().iter().map(|&b| (b - g0m) * (b - g0m)).sum();
    if sst == 0.0 {
        return Err(MetricError::ConstantTarget);
    }
    Ok(1.0 - sse / sst)
}

/// Peak percent threshold statistic PPTS_(l,u): the mean of the absolute
/// relative errors |g0 - g| / |g| whose percentile rank (100 (i - 0.5) / m
/// over the m guarded ratios, sorted ascending) lies in [l, u].
///
/// Ratios where |g(t_i)| <= 1e-12 max|g| are excluded before ranking.
pub fn ppts(g: &TimeSeries, g0: &TimeSeries, l: f64, u: f64) -> MetricResult {
    check_grids(g, g0)?;
    if !(0.0..=100.0).contains(&l) || !(0.0..=100.0).contains(&u) || l >= u {
        return Err(MetricError::BadPercentiles);
    }
    let max_abs = g.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let eps_den = 1e-12 * max_abs;
    let mut ratios: Vec<f64> = g
        .values()
        .iter()
        .zip(g0.values())
        .filter(|(a, _)| a.abs() > eps_den)
        .map(|(a, b)| (b - a).abs() / a.abs())
        .collect();
    if ratios.is_empty() {
        return Err(MetricError::NoValidRatios);
    }
    ratios.sort_by(f64::total_cmp);
    let m = ratios.len() as f64;
    let kept: Vec<f64> = ratios
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let rank = 100.0 * ((*i + 1) as f64 - 0.5) / m;
            rank >= l && rank <= u
        })
        .map(|(_, &r)| r)
        .collect();
    if kept.is_empty() {
        return Err(MetricError::EmptyBand);
    }
    Ok(mean(&kept))
}

/// Count of ratios excluded by the PPTS denominator guard.
pub fn ppts_excluded_count(g: &TimeSeries) -> usize {
    let max_abs = g.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let eps_den = 1e-12 * max_abs;
    g.values().iter().filter(|a| a.abs() <= eps_den).count()
}

/// Bundles every metric, with PPTS at the two bands reported in the case
/// studies: (5, 95) and (1, 100).
pub fn report(g: &TimeSeries, g0: &TimeSeries) -> FitReport {
    FitReport {
        delta: delta(g, g0),
        rmse: rmse(g, g0),
        r2: r2(g, g0),
        nse: nse(g, g0),
        ppts_5_95: ppts(g, g0, 5.0, 95.0),
        ppts_1_100: ppts(g, g0, 1.0, 100.0),
    }
}
