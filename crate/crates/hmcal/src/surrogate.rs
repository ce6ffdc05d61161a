//! Scalar-output Gaussian-process emulator.
//!
//! Correlation family: power-exponential product
//! `R(theta; a, b) = prod_k exp(-10^theta_k |a_k - b_k|^p)` with the
//! lengthscales searched on a log10 box. Hyperparameters come from profile
//! maximum likelihood: mu and sigma^2 have closed forms given theta, and
//! theta itself is found by a multi-start compass search on the profile
//! deviance `n log sigma^2(theta) + log det R(theta)`.

use rand::Rng;
use rayon::prelude::*;

use crate::error::FitError;
use crate::linalg::{dot, Cholesky, SquareMatrix};
use crate::rng::{rng_for, Stream};
use crate::sim::DesignPoint;

/// Correlation hyperparameters: log10 lengthscales plus the fixed power.
#[derive(Debug, Clone, PartialEq)]
pub struct GpHyperParams {
    pub log10_lengthscales: Vec<f64>,
    pub power: f64,
}

/// Mean and standard deviation at one prediction site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub sd: f64,
}

/// Power-exponential product correlation, in (0, 1].
pub fn corr(theta: &GpHyperParams, xa: &[f64], xb: &[f64]) -> f64 {
    debug_assert_eq!(xa.len(), xb.len());
    debug_assert_eq!(xa.len(), theta.log10_lengthscales.len());
    let mut exponent = 0.0;
    for ((&a, &b), &t) in xa.iter().zip(xb).zip(&theta.log10_lengthscales) {
        exponent += 10f64.powf(t) * (a - b).abs().powf(theta.power);
    }
    (-exponent).exp()
}

/// Fit controls; the defaults are what the engine uses everywhere.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Correlation power p in (0, 2]; near-Gaussian but better conditioned.
    pub power: f64,
    /// Search box for each log10 lengthscale.
    pub theta_lo: f64,
    pub theta_hi: f64,
    /// Multi-start count is `starts_per_dim * d`.
    pub starts_per_dim: usize,
    /// Seed for the start-point Latin hypercube.
    pub seed: u64,
    /// Initial nugget; escalated x10 until the factorization succeeds.
    pub nugget: f64,
    pub nugget_max: f64,
    /// A factorization only counts as successful while the condition
    /// estimate stays below this; past it the nugget escalates.
    pub max_condition: f64,
    /// Smallest acceptable conditional variance (squared Cholesky pivot) of
    /// a training point given the others. Dense clusters of near-duplicate
    /// points (the normal endgame of a calibration run) drive pivots toward
    /// zero long before the factorization breaks outright; the nugget
    /// escalates until every pivot clears this floor.
    pub min_conditional_variance: f64,
    /// Extra search starts (clamped to the box); the calibration loop seeds
    /// each refit with the previous iteration's optimum.
    pub warm_starts: Vec<Vec<f64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            power: 1.95,
            theta_lo: -2.0,
            theta_hi: 3.0,
            starts_per_dim: 5,
            seed: 0,
            nugget: 1e-8,
            nugget_max: 1e-2,
            max_condition: 7e10,
            min_conditional_variance: 1e-3,
            warm_starts: Vec::new(),
        }
    }
}

/// Scalar diagnostics of one fitted surrogate.
#[derive(Debug, Clone)]
pub struct FitDiagnostics {
    pub n: usize,
    pub mu_hat: f64,
    pub sigma2_hat: f64,
    pub theta: Vec<f64>,
    pub power: f64,
    pub nugget: f64,
    pub deviance: f64,
    pub degenerate: bool,
    pub nugget_escalated: bool,
}

/// A fitted GP surrogate; immutable, safe to share across threads.
#[derive(Debug, Clone)]
pub struct SurrogateModel {
    x: Vec<Vec<f64>>,
    mu_hat: f64,
    sigma2_hat: f64,
    theta: GpHyperParams,
    nugget: f64,
    /// R^-1 (y - mu 1); empty for degenerate models.
    weights: Vec<f64>,
    chol: Option<Cholesky>,
    deviance: f64,
    degenerate: bool,
    nugget_escalated: bool,
    start_deviances: Vec<f64>,
}

struct ProfileEval {
    deviance: f64,
    mu_hat: f64,
    sigma2_hat: f64,
    nugget: f64,
    chol: Cholesky,
}

/// Builds R(theta) with `1 + nugget` on the diagonal.
fn correlation_matrix(x: &[Vec<f64>], theta: &GpHyperParams, nugget: f64) -> SquareMatrix {
    let n = x.len();
    let mut r = SquareMatrix::zeros(n);
    for i in 0..n {
        r.set(i, i, 1.0 + nugget);
        for j in 0..i {
            let c = corr(theta, &x[i], &x[j]);
            r.set(i, j, c);
            r.set(j, i, c);
        }
    }
    r
}

/// Profile deviance and closed-form estimates at one theta. Escalates the
/// nugget until the factorization succeeds (exists and is acceptably
/// conditioned); `None` if it never does. At the nugget cap an
/// ill-conditioned but existing factorization is accepted.
fn profile_at(
    x: &[Vec<f64>],
    y: &[f64],
    theta: &GpHyperParams,
    nugget_start: f64,
    nugget_max: f64,
    max_condition: f64,
    min_conditional_variance: f64,
) -> Option<ProfileEval> {
    let n = x.len();
    let healthy = |c: &Cholesky, r: &SquareMatrix| {
        c.min_pivot_squared() >= min_conditional_variance && c.condition_estimate(r) <= max_condition
    };
    let attempt = |nugget: f64| -> (Option<Cholesky>, bool) {
        let r = correlation_matrix(x, theta, nugget);
        match Cholesky::factor(&r) {
            Some(c) => {
                let ok = healthy(&c, &r);
                (Some(c), ok)
            }
            None => (None, false),
        }
    };
    let ladder_up = |nugget: f64| if nugget == 0.0 { 1e-12 } else { nugget * 10.0 };

    // Probe the base nugget; when it is unhealthy, jump the escalation
    // ladder straight to the level the pivot deficit calls for instead of
    // paying one factorization per rung, then settle on the smallest
    // healthy rung.
    let (nugget, chol) = {
        let (base_factor, base_ok) = attempt(nugget_start);
        if base_ok {
            (nugget_start, base_factor.expect("healthy factor exists"))
        } else {
            let deficit = match &base_factor {
                Some(c) => (min_conditional_variance - c.min_pivot_squared()).max(0.0),
                None => min_conditional_variance.max(1e-12),
            };
            let mut guess = ladder_up(nugget_start);
            while guess < deficit && guess <= nugget_max {
                guess *= 10.0;
            }
            let mut last_resort = base_factor.map(|c| (nugget_start, c));
            let mut level = guess;
            loop {
                if level > nugget_max * (1.0 + 1e-12) {
                    match last_resort.take() {
                        Some(lr) => break lr,
                        None => return None,
                    }
                }
                let (factor, ok) = attempt(level);
                if ok {
                    let mut best = (level, factor.expect("healthy factor exists"));
                    // the jump may have overshot a rung; settle downward
                    loop {
                        let lower = best.0 / 10.0;
                        if lower < ladder_up(nugget_start) * (1.0 - 1e-12) {
                            break;
                        }
                        match attempt(lower) {
                            (Some(c), true) => best = (lower, c),
                            _ => break,
                        }
                    }
                    break best;
                }
                if let Some(c) = factor {
                    last_resort = Some((level, c));
                }
                level = ladder_up(level);
            }
        }
    };
    let a = chol.solve(y);
    let ones = vec![1.0; n];
    let b = chol.solve(&ones);
    let denom = b.iter().sum::<f64>();
    if denom <= 0.0 || !denom.is_finite() {
        return None;
    }
    let mu_hat = a.iter().sum::<f64>() / denom;
    // e^T R^-1 e with e = y - mu 1 and R^-1 e = a - mu b
    let mut quad = 0.0;
    for i in 0..n {
        quad += (y[i] - mu_hat) * (a[i] - mu_hat * b[i]);
    }
    let sigma2_hat = (quad / n as f64).max(0.0);
    let deviance = n as f64 * sigma2_hat.max(1e-300).ln() + chol.log_det();
    if !deviance.is_finite() {
        return None;
    }
    Some(ProfileEval {
        deviance,
        mu_hat,
        sigma2_hat,
        nugget,
        chol,
    })
}

/// Compass search on the profile deviance from one start point. Any strict
/// decrease moves; the step halves when no axis move helps.
fn compass_search(
    x: &[Vec<f64>],
    y: &[f64],
    start: &[f64],
    opts: &FitOptions,
    eval_cap: usize,
) -> Option<(Vec<f64>, f64)> {
    let d = start.len();
    let mut theta = start.to_vec();
    let hp = |t: &[f64]| GpHyperParams {
        log10_lengthscales: t.to_vec(),
        power: opts.power,
    };
    let eval = |t: &[f64]| {
        profile_at(x, y, &hp(t), opts.nugget, opts.nugget_max, opts.max_condition, opts.min_conditional_variance).map(|p| p.deviance)
    };
    let mut f = eval(&theta)?;
    let mut step = 0.5;
    let min_step = 1e-4;
    let mut evals = 0usize;
    while step >= min_step && evals < eval_cap {
        let mut best_f = f;
        let mut best_theta: Option<Vec<f64>> = None;
        for k in 0..d {
            for sign in [1.0, -1.0] {
                let mut cand = theta.clone();
                cand[k] = (cand[k] + sign * step).clamp(opts.theta_lo, opts.theta_hi);
                if cand[k] == theta[k] {
                    continue;
                }
                evals += 1;
                if let Some(fc) = eval(&cand) {
                    if fc < best_f {
                        best_f = fc;
                        best_theta = Some(cand);
                    }
                }
            }
        }
        match best_theta {
            Some(t) => {
                theta = t;
                f = best_f;
            }
            None => step *= 0.5,
        }
    }
    Some((theta, f))
}

/// Fits a surrogate to training pairs `(x_i, y_i)`.
///
/// Exact duplicate inputs are collapsed to their first occurrence before
/// fitting (a deterministic simulator returns identical outputs, and exact
/// duplicates make R singular). Constant outputs short-circuit into a
/// degenerate model that predicts the constant with zero uncertainty.
pub fn fit(x: &[DesignPoint], y: &[f64], opts: &FitOptions) -> Result<SurrogateModel, FitError> {
    if x.len() != y.len() {
        return Err(FitError::LengthMismatch { x: x.len(), y: y.len() });
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(FitError::NonFiniteOutput(i));
    }
    if x.len() < 2 {
        return Err(FitError::TooFewPoints(x.len()));
    }
    let d = x[0].dim();
    if x.iter().any(|p| p.dim() != d) {
        return Err(FitError::DimensionMismatch);
    }

    // dedup exact coordinate matches, keeping first occurrences
    let mut seen = std::collections::HashSet::new();
    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(x.len());
    let mut ys: Vec<f64> = Vec::with_capacity(y.len());
    for (p, &v) in x.iter().zip(y) {
        if seen.insert(p.bit_key()) {
            xs.push(p.coords().to_vec());
            ys.push(v);
        }
    }
    if xs.len() < 2 {
        return Err(FitError::TooFewPoints(xs.len()));
    }
    let n = xs.len();

    let y_min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if y_min == y_max {
        let theta = GpHyperParams {
            log10_lengthscales: vec![0.5 * (opts.theta_lo + opts.theta_hi); d],
            power: opts.power,
        };
        return Ok(SurrogateModel {
            x: xs,
            mu_hat: ys[0],
            sigma2_hat: 0.0,
            theta,
            nugget: opts.nugget,
            weights: Vec::new(),
            chol: None,
            deviance: f64::NEG_INFINITY,
            degenerate: true,
            nugget_escalated: false,
            start_deviances: Vec::new(),
        });
    }

    // Center the outputs before searching theta: the profile deviance is
    // translation invariant analytically, and centering keeps it that way
    // numerically, so fits on y and y + const walk the same search path.
    let y_offset = ys.iter().sum::<f64>() / n as f64;
    let yc: Vec<f64> = ys.iter().map(|v| v - y_offset).collect();

    // Search effort tapers with n: deviance evaluations cost O(n^3), and
    // as points accumulate the likelihood concentrates enough that fewer,
    // shorter searches (plus the caller's warm start) suffice.
    let (n_starts, eval_cap) = if n <= 40 {
        ((opts.starts_per_dim * d).max(1), 400 * d)
    } else if n <= 100 {
        (((opts.starts_per_dim * d) * 3 / 5).max(2), 200 * d)
    } else if n <= 250 {
        (((opts.starts_per_dim * d) / 2).max(2), 120 * d)
    } else {
        (d.max(2), 60 * d)
    };

    // multi-start compass search from a Latin hypercube over the theta box
    let mut rng = rng_for(opts.seed, Stream::FitStarts, 0);
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(n_starts);
    for s in 0..n_starts {
        let mut t = Vec::with_capacity(d);
        for _ in 0..d {
            // stratified along each axis independently
            let u: f64 = rng.random();
            let v = (s as f64 + u) / n_starts as f64;
            t.push(opts.theta_lo + v * (opts.theta_hi - opts.theta_lo));
        }
        starts.push(t);
    }
    // decorrelate the stratification across axes
    for k in 1..d {
        let mut perm: Vec<usize> = (0..n_starts).collect();
        use rand::seq::SliceRandom;
        perm.shuffle(&mut rng);
        let col: Vec<f64> = perm.iter().map(|&i| starts[i][k]).collect();
        for (s, v) in col.into_iter().enumerate() {
            starts[s][k] = v;
        }
    }
    for warm in &opts.warm_starts {
        if warm.len() == d {
            starts.push(
                warm.iter()
                    .map(|&t| t.clamp(opts.theta_lo, opts.theta_hi))
                    .collect(),
            );
        }
    }

    let start_evals: Vec<Option<f64>> = starts
        .iter()
        .map(|t| {
            profile_at(
                &xs,
                &yc,
                &GpHyperParams {
                    log10_lengthscales: t.clone(),
                    power: opts.power,
                },
                opts.nugget,
                opts.nugget_max,
                opts.max_condition,
                opts.min_conditional_variance,
            )
            .map(|p| p.deviance)
        })
        .collect();

    let searched: Vec<Option<(Vec<f64>, f64)>> = starts
        .par_iter()
        .map(|start| compass_search(&xs, &yc, start, opts, eval_cap))
        .collect();

    let mut best: Option<(usize, &(Vec<f64>, f64))> = None;
    for (i, s) in searched.iter().enumerate() {
        if let Some(pair) = s {
            let better = match best {
                None => true,
                Some((_, b)) => pair.1 < b.1,
            };
            if better {
                best = Some((i, pair));
            }
        }
    }
    let (_, (theta_best, _)) = best.ok_or(FitError::Singular { nugget: opts.nugget_max })?;

    let theta = GpHyperParams {
        log10_lengthscales: theta_best.clone(),
        power: opts.power,
    };
    let profile = profile_at(&xs, &yc, &theta, opts.nugget, opts.nugget_max, opts.max_condition, opts.min_conditional_variance)
        .ok_or(FitError::Singular { nugget: opts.nugget_max })?;

    let mut resid = vec![0.0; n];
    for i in 0..n {
        resid[i] = yc[i] - profile.mu_hat;
    }
    let weights = profile.chol.solve(&resid);

    Ok(SurrogateModel {
        x: xs,
        mu_hat: profile.mu_hat + y_offset,
        sigma2_hat: profile.sigma2_hat,
        theta,
        nugget: profile.nugget,
        weights,
        chol: Some(profile.chol),
        deviance: profile.deviance,
        degenerate: false,
        nugget_escalated: profile.nugget > opts.nugget,
        start_deviances: start_evals.into_iter().flatten().collect(),
    })
}

impl SurrogateModel {
    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, |p| p.len())
    }

    pub fn mu_hat(&self) -> f64 {
        self.mu_hat
    }

    pub fn sigma2_hat(&self) -> f64 {
        self.sigma2_hat
    }

    pub fn theta(&self) -> &GpHyperParams {
        &self.theta
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn deviance(&self) -> f64 {
        self.deviance
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn nugget_escalated(&self) -> bool {
        self.nugget_escalated
    }

    /// Deviance of every successful multi-start initial point.
    pub fn start_deviances(&self) -> &[f64] {
        &self.start_deviances
    }

    /// Relative reconstruction error of the stored factorization.
    pub fn factorization_error(&self) -> f64 {
        let Some(chol) = &self.chol else { return 0.0 };
        let r = correlation_matrix(&self.x, &self.theta, self.nugget);
        let rec = chol.reconstruct();
        let mut worst = 0.0f64;
        for i in 0..r.n() {
            for j in 0..r.n() {
                let denom = r.get(i, j).abs().max(1.0);
                worst = worst.max((r.get(i, j) - rec.get(i, j)).abs() / denom);
            }
        }
        worst
    }

    pub fn predict(&self, x_star: &DesignPoint) -> Prediction {
        self.predict_coords(x_star.coords())
    }

    fn predict_coords(&self, x_star: &[f64]) -> Prediction {
        if self.degenerate {
            return Prediction {
                mean: self.mu_hat,
                sd: 0.0,
            };
        }
        let n = self.x.len();
        let mut r = vec![0.0; n];
        for i in 0..n {
            r[i] = corr(&self.theta, x_star, &self.x[i]);
        }
        let mean = self.mu_hat + dot(&r, &self.weights);
        let chol = self.chol.as_ref().expect("non-degenerate model has factor");
        let mut u = r;
        chol.forward_solve(&mut u);
        let s2 = self.sigma2_hat * (1.0 - dot(&u, &u));
        Prediction {
            mean,
            sd: s2.max(0.0).sqrt(),
        }
    }

    /// Elementwise [`predict`](Self::predict) over a batch, order-aligned
    /// with the input.
    pub fn predict_batch(&self, xs: &[DesignPoint]) -> Vec<Prediction> {
        xs.par_iter().map(|x| self.predict(x)).collect()
    }

    /// Plain-text diagnostics dump.
    pub fn report(&self) -> String {
        format!(
            "n: {}\nmu_hat: {}\nsigma2_hat: {}\ntheta_log10: {:?}\npower: {}\nnugget: {:e}\ndeviance: {}\ndegenerate: {}\nnugget_escalated: {}\n",
            self.n(),
            self.mu_hat,
            self.sigma2_hat,
            self.theta.log10_lengthscales,
            self.theta.power,
            self.nugget,
            self.deviance,
            self.degenerate,
            self.nugget_escalated,
        )
    }

    pub fn diagnostics(&self) -> FitDiagnostics {
        FitDiagnostics {
            n: self.n(),
            mu_hat: self.mu_hat,
            sigma2_hat: self.sigma2_hat,
            theta: self.theta.log10_lengthscales.clone(),
            power: self.theta.power,
            nugget: self.nugget,
            deviance: self.deviance,
            degenerate: self.degenerate,
            nugget_escalated: self.nugget_escalated,
        }
    }
}

/// Profile deviance on a fixed theta grid; the brute-force oracle used by
/// tests to bound the multi-start optimum on 1-d problems.
pub fn grid_search_deviance(
    x: &[DesignPoint],
    y: &[f64],
    opts: &FitOptions,
    grid_points: usize,
) -> Option<f64> {
    let xs: Vec<Vec<f64>> = x.iter().map(|p| p.coords().to_vec()).collect();
    let mut best: Option<f64> = None;
    for g in 0..grid_points {
        let t = opts.theta_lo
            + (opts.theta_hi - opts.theta_lo) * g as f64 / (grid_points - 1) as f64;
        let theta = GpHyperParams {
            log10_lengthscales: vec![t; x.first().map_or(1, |p| p.dim())],
            power: opts.power,
        };
        if let Some(p) = profile_at(&xs, y, &theta, opts.nugget, opts.nugget_max, opts.max_condition, opts.min_conditional_variance) {
            best = Some(match best {
                None => p.deviance,
                Some(b) => b.min(p.deviance),
            });
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(coords: &[f64]) -> DesignPoint {
        DesignPoint::new(coords.to_vec()).unwrap()
    }

    #[test]
    fn corr_basics() {
        let theta = GpHyperParams {
            log10_lengthscales: vec![0.0],
            power: 1.95,
        };
        assert_eq!(corr(&theta, &[0.3], &[0.3]), 1.0);
        // |d| = 1, 10^0 = 1 -> e^{-1}
        let c = corr(&theta, &[0.0], &[1.0]);
        assert!((c - (-1.0f64).exp()).abs() < 1e-15);
        // monotone decrease in theta for distinct points
        let mut last = 1.0;
        for t in [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0] {
            let theta = GpHyperParams {
                log10_lengthscales: vec![t],
                power: 1.95,
            };
            let c = corr(&theta, &[0.2], &[0.7]);
            assert!(c < last && c > 0.0);
            last = c;
        }
    }

    #[test]
    fn constant_outputs_give_degenerate_model() {
        let x = vec![pt(&[0.1]), pt(&[0.5]), pt(&[0.9])];
        let y = vec![4.0, 4.0, 4.0];
        let m = fit(&x, &y, &FitOptions::default()).unwrap();
        assert!(m.is_degenerate());
        let p = m.predict(&pt(&[0.33]));
        assert_eq!(p.mean, 4.0);
        assert_eq!(p.sd, 0.0);
    }

    #[test]
    fn interpolates_training_data() {
        let x: Vec<DesignPoint> = (0..8).map(|i| pt(&[i as f64 / 7.0])).collect();
        let y: Vec<f64> = x.iter().map(|p| (3.0 * p.coords()[0]).sin()).collect();
        let m = fit(&x, &y, &FitOptions::default()).unwrap();
        let range = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - y.iter().cloned().fold(f64::INFINITY, f64::min);
        for (xi, yi) in x.iter().zip(&y) {
            let p = m.predict(xi);
            assert!(
                (p.mean - yi).abs() <= 1e-6 * range,
                "pred {} vs {}",
                p.mean,
                yi
            );
            assert!(p.sd <= 1e-3);
        }
    }

    #[test]
    fn hand_two_point_system() {
        // X = {0.2, 0.8}, y = {1, 3}, theta = 1 (so 10^1 = 10), p = 2.
        // rho = exp(-10 * 0.36); mu = 2; sigma2 = 1/(1-rho).
        // At x*: r = (exp(-10 (x*-0.2)^2), exp(-10 (x*-0.8)^2)),
        // R^-1 (y - mu 1) = 1/(1-rho^2) * [[1,-rho],[-rho,1]] * (-1, 1)
        //                 = ( -(1+rho), 1+rho ) / (1-rho^2) = (-1, 1)/(1-rho).
        let rho = (-10.0f64 * 0.36).exp();
        let x_star = 0.4;
        let r1 = (-10.0f64 * (x_star - 0.2) * (x_star - 0.2)).exp();
        let r2 = (-10.0f64 * (x_star - 0.8) * (x_star - 0.8)).exp();
        let mean_expected = 2.0 + (-r1 + r2) / (1.0 - rho);
        let sigma2 = 1.0 / (1.0 - rho);
        // r^T R^-1 r via 2x2 closed form
        let quad = (r1 * r1 - 2.0 * rho * r1 * r2 + r2 * r2) / (1.0 - rho * rho);
        let sd_expected = (sigma2 * (1.0 - quad)).max(0.0).sqrt();

        // build the same model directly (fixed theta, no search, no nugget)
        let xs = vec![vec![0.2], vec![0.8]];
        let theta = GpHyperParams {
            log10_lengthscales: vec![1.0],
            power: 2.0,
        };
        let profile = profile_at(&xs, &[1.0, 3.0], &theta, 0.0, 0.0, f64::INFINITY, 0.0).unwrap();
        assert!((profile.mu_hat - 2.0).abs() < 1e-12);
        let m = SurrogateModel {
            x: xs,
            mu_hat: profile.mu_hat,
            sigma2_hat: sigma2, // hand value: e^T R^-1 e / n = (2/(1-rho))/2
            theta,
            nugget: 0.0,
            weights: vec![-1.0 / (1.0 - rho), 1.0 / (1.0 - rho)],
            chol: Some(profile.chol),
            deviance: profile.deviance,
            degenerate: false,
            nugget_escalated: false,
            start_deviances: vec![],
        };
        let p = m.predict(&pt(&[x_star]));
        assert!((p.mean - mean_expected).abs() < 1e-10, "{} vs {mean_expected}", p.mean);
        assert!((p.sd - sd_expected).abs() < 1e-10, "{} vs {sd_expected}", p.sd);
        // and the profiled sigma2 agrees with the hand derivation
        assert!((profile.sigma2_hat - 1.0 / (1.0 - rho)).abs() < 1e-12);
    }

    #[test]
    fn multistart_beats_grid_oracle_1d() {
        let x = vec![pt(&[0.05]), pt(&[0.35]), pt(&[0.6]), pt(&[0.95])];
        let y = vec![0.2, -0.7, 1.4, 0.9];
        let opts = FitOptions::default();
        let m = fit(&x, &y, &opts).unwrap();
        let grid_best = grid_search_deviance(&x, &y, &opts, 200).unwrap();
        assert!(
            m.deviance() <= grid_best + 1e-6,
            "multi-start {} vs grid {grid_best}",
            m.deviance()
        );
    }

    #[test]
    fn deviance_not_worse_than_any_start() {
        let x = vec![pt(&[0.1, 0.2]), pt(&[0.5, 0.8]), pt(&[0.8, 0.4]), pt(&[0.3, 0.6])];
        let y = vec![1.0, 2.0, -0.5, 0.3];
        let m = fit(&x, &y, &FitOptions::default()).unwrap();
        for &s in m.start_deviances() {
            assert!(m.deviance() <= s + 1e-9);
        }
    }

    #[test]
    fn far_field_reverts_to_prior() {
        // long distances with a huge theta: r ~ 0 away from training data
        let opts = FitOptions::default();
        let theta = GpHyperParams {
            log10_lengthscales: vec![3.0],
            power: opts.power,
        };
        let xs = vec![vec![0.0], vec![0.01]];
        let profile = profile_at(&xs, &[1.0, 1.1], &theta, 1e-8, 1e-2, 7e10, 1e-3).unwrap();
        let far = SurrogateModel {
            x: xs,
            mu_hat: profile.mu_hat,
            sigma2_hat: profile.sigma2_hat,
            theta,
            nugget: profile.nugget,
            weights: {
                let resid = vec![1.0 - profile.mu_hat, 1.1 - profile.mu_hat];
                profile.chol.solve(&resid)
            },
            chol: Some(profile.chol),
            deviance: profile.deviance,
            degenerate: false,
            nugget_escalated: false,
            start_deviances: vec![],
        };
        let p = far.predict(&pt(&[1.0]));
        assert!((p.mean - far.mu_hat).abs() < 1e-6);
        assert!((p.sd - far.sigma2_hat.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn duplicates_are_collapsed() {
        let x = vec![pt(&[0.2]), pt(&[0.2]), pt(&[0.7]), pt(&[0.9])];
        let y = vec![1.0, 1.0, 2.0, 0.5];
        let m = fit(&x, &y, &FitOptions::default()).unwrap();
        assert_eq!(m.n(), 3);
    }

    #[test]
    fn batch_matches_single() {
        let x = vec![pt(&[0.1, 0.3]), pt(&[0.6, 0.2]), pt(&[0.4, 0.9])];
        let y = vec![0.0, 1.0, -1.0];
        let m = fit(&x, &y, &FitOptions::default()).unwrap();
        let sites = vec![pt(&[0.25, 0.25]), pt(&[0.5, 0.5]), pt(&[0.1, 0.3])];
        let batch = m.predict_batch(&sites);
        for (s, b) in sites.iter().zip(&batch) {
            let single = m.predict(s);
            assert_eq!(single.mean, b.mean);
            assert_eq!(single.sd, b.sd);
        }
        // training point has ~zero sd
        assert!(batch[2].sd < 1e-3);
    }

    #[test]
    fn translation_shifts_mean_only() {
        let x = vec![pt(&[0.1]), pt(&[0.4]), pt(&[0.7]), pt(&[1.0])];
        let y = vec![0.3, 0.9, -0.4, 0.0];
        let shifted: Vec<f64> = y.iter().map(|v| v + 100.0).collect();
        let m0 = fit(&x, &y, &FitOptions::default()).unwrap();
        let m1 = fit(&x, &shifted, &FitOptions::default()).unwrap();
        for x_star in [0.05, 0.3, 0.55, 0.85] {
            let p0 = m0.predict(&pt(&[x_star]));
            let p1 = m1.predict(&pt(&[x_star]));
            assert!((p1.mean - p0.mean - 100.0).abs() < 1e-8, "{} {}", p0.mean, p1.mean);
            assert!((p1.sd - p0.sd).abs() < 1e-8);
        }
    }

    #[test]
    fn report_lists_the_fit() {
        let x = vec![pt(&[0.2]), pt(&[0.6]), pt(&[0.9])];
        let y = vec![1.0, -0.5, 2.0];
        let m = fit(&x, &y, &FitOptions::default()).unwrap();
        let report = m.report();
        assert!(report.contains("n: 3"));
        assert!(report.contains("deviance:"));
        assert!(report.contains("nugget:"));
    }

    #[test]
    fn factorization_reconstructs_r() {
        let x: Vec<DesignPoint> = (0..10).map(|i| pt(&[i as f64 / 9.0, (i * 7 % 10) as f64 / 9.0])).collect();
        let y: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).cos()).collect();
        let m = fit(&x, &y, &FitOptions::default()).unwrap();
        assert!(m.factorization_error() < 1e-8);
    }
}
