//! Simulator abstraction: time grids, series, design points, the builtin
//! test-function simulator and the external-executable adapter.

mod external;

pub use external::ExternalSpec;

use crate::error::{DomainError, SimError};

/// Ordered time stamps t_1 < ... < t_L.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    values: Vec<f64>,
}

impl TimeGrid {
    pub fn new(values: Vec<f64>) -> Result<Self, DomainError> {
        if values.len() < 2 {
            return Err(DomainError::GridTooShort(values.len()));
        }
        for i in 0..values.len() {
            if !values[i].is_finite() || (i > 0 && values[i] <= values[i - 1]) {
                return Err(DomainError::GridNotIncreasing(i));
            }
        }
        Ok(Self { values })
    }

    /// Equidistant grid of `len` points spanning `[start, end]`.
    pub fn equidistant(start: f64, end: f64, len: usize) -> Result<Self, DomainError> {
        if len < 2 {
            return Err(DomainError::GridTooShort(len));
        }
        let step = (end - start) / (len - 1) as f64;
        Self::new((0..len).map(|i| start + step * i as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: L >= 2
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A length-L response sampled on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self, DomainError> {
        if values.len() != grid.len() {
            return Err(DomainError::SeriesLengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(DomainError::SeriesNotFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Exact grid equality; metrics refuse to compare series on different grids.
    pub fn same_grid(&self, other: &TimeSeries) -> bool {
        self.grid == other.grid
    }
}

/// A point in the scaled input space [0, 1]^d.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoint {
    coords: Vec<f64>,
}

impl DesignPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self, DomainError> {
        if coords.is_empty() {
            return Err(DomainError::EmptyPoint);
        }
        for (i, &c) in coords.iter().enumerate() {
            if !(0.0..=1.0).contains(&c) {
                return Err(DomainError::CoordOutOfRange { index: i, value: c });
            }
        }
        Ok(Self { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Bit-exact key for caching simulator evaluations.
    pub fn bit_key(&self) -> Vec<u64> {
        self.coords.iter().map(|c| c.to_bits()).collect()
    }

    pub fn distance(&self, other: &DesignPoint) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Native-unit box for external simulators; the engine works in [0,1]^d and
/// descales on the way out.
#[derive(Debug, Clone, PartialEq)]
pub struct InputBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
    names: Vec<String>,
}

impl InputBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, names: Vec<String>) -> Result<Self, DomainError> {
        if lower.len() != upper.len() || lower.len() != names.len() {
            return Err(DomainError::BoundsDimensionMismatch {
                expected: lower.len(),
                got: upper.len().max(names.len()),
            });
        }
        for i in 0..lower.len() {
            if !(lower[i] < upper[i]) || !lower[i].is_finite() || !upper[i].is_finite() {
                return Err(DomainError::BadBounds(i));
            }
        }
        Ok(Self { lower, upper, names })
    }

    /// The unit box with coordinate names x1..xd.
    pub fn unit(d: usize) -> Self {
        Self {
            lower: vec![0.0; d],
            upper: vec![1.0; d],
            names: (1..=d).map(|k| format!("x{k}")).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn descale(&self, x: &DesignPoint) -> Vec<f64> {
        x.coords()
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&c, (&lo, &hi))| lo + c * (hi - lo))
            .collect()
    }
}

/// Which simulator backs a run.
#[derive(Debug, Clone)]
pub enum SimulatorKind {
    /// The builtin two-parameter test function.
    BuiltinTestFunc,
    /// An external executable driven over the subprocess protocol.
    ExternalExec(ExternalSpec),
}

/// Everything the engine needs to evaluate one simulator.
#[derive(Debug, Clone)]
pub struct SimulatorSpec {
    pub kind: SimulatorKind,
    pub d: usize,
    pub grid: TimeGrid,
    pub bounds: InputBounds,
}

impl SimulatorSpec {
    /// The builtin test simulator: d = 2 on the default grid.
    pub fn builtin() -> Self {
        let grid = default_grid();
        Self {
            kind: SimulatorKind::BuiltinTestFunc,
            d: 2,
            grid,
            bounds: InputBounds::unit(2),
        }
    }

    /// Builtin simulator on a caller-supplied grid.
    pub fn builtin_on(grid: TimeGrid) -> Self {
        Self {
            kind: SimulatorKind::BuiltinTestFunc,
            d: 2,
            grid,
            bounds: InputBounds::unit(2),
        }
    }

    pub fn external(spec: ExternalSpec, grid: TimeGrid, bounds: InputBounds) -> Self {
        let d = bounds.dim();
        Self {
            kind: SimulatorKind::ExternalExec(spec),
            d,
            grid,
            bounds,
        }
    }

    pub fn evaluate(&self, x: &DesignPoint) -> Result<TimeSeries, SimError> {
        if x.dim() != self.d {
            return Err(SimError::DimensionMismatch {
                expected: self.d,
                got: x.dim(),
            });
        }
        match &self.kind {
            SimulatorKind::BuiltinTestFunc => eval_testfunc(x, &self.grid),
            SimulatorKind::ExternalExec(spec) => {
                let native = self.bounds.descale(x);
                external::eval_external(spec, x, &native, &self.grid)
            }
        }
    }

    /// Evaluates a batch, in parallel where the backend allows it. Results
    /// come back in submission order; the first failure aborts the batch.
    pub fn evaluate_batch(&self, xs: &[DesignPoint]) -> Result<Vec<TimeSeries>, SimError> {
        match &self.kind {
            SimulatorKind::BuiltinTestFunc => {
                use rayon::prelude::*;
                xs.par_iter().map(|x| self.evaluate(x)).collect()
            }
            SimulatorKind::ExternalExec(spec) => {
                let inputs: Vec<(DesignPoint, Vec<f64>)> = xs
                    .iter()
                    .map(|x| {
                        if x.dim() != self.d {
                            return Err(SimError::DimensionMismatch {
                                expected: self.d,
                                got: x.dim(),
                            });
                        }
                        Ok((x.clone(), self.bounds.descale(x)))
                    })
                    .collect::<Result<_, _>>()?;
                external::eval_batch(spec, &inputs, &self.grid)
            }
        }
    }
}

/// The default grid: L = 101 equidistant points on [0.5, 2.5].
pub fn default_grid() -> TimeGrid {
    TimeGrid::new((0..101).map(|i| 0.5 + 0.02 * i as f64).collect())
        .expect("default grid is valid")
}

/// The builtin time-series test function
/// `g(x, t) = sin(10 pi t) / ((2 x1 + 1) t) + |t - 1|^(4 x2 + 2)`.
pub fn eval_testfunc(x: &DesignPoint, grid: &TimeGrid) -> Result<TimeSeries, SimError> {
    if x.dim() != 2 {
        return Err(SimError::DimensionMismatch {
            expected: 2,
            got: x.dim(),
        });
    }
    if let Some((i, &t)) = grid.values().iter().enumerate().find(|(_, &t)| t <= 0.0) {
        return Err(SimError::NonPositiveTime { index: i, value: t });
    }
    let x1 = x.coords()[0];
    let x2 = x.coords()[1];
    let values = grid
        .values()
        .iter()
        .map(|&t| {
            (10.0 * std::f64::consts::PI * t).sin() / ((2.0 * x1 + 1.0) * t)
                + (t - 1.0).abs().powf(4.0 * x2 + 2.0)
        })
        .collect();
    Ok(TimeSeries::new(grid.clone(), values)?)
}

/// Synthetic target: the simulator response at a known true input.
pub fn target_from_point(x0: &DesignPoint, sim: &SimulatorSpec) -> Result<TimeSeries, SimError> {
    sim.evaluate(x0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(coords: &[f64]) -> DesignPoint {
        DesignPoint::new(coords.to_vec()).unwrap()
    }

    #[test]
    fn default_grid_matches_expected_layout() {
        let g = default_grid();
        assert_eq!(g.len(), 101);
        assert_eq!(g.values()[0], 0.5);
        assert_eq!(g.values()[100], 2.5);
        // 1-based index 26 is t = 1.00
        assert!((g.values()[25] - 1.0).abs() < 1e-12);
        for w in g.values().windows(2) {
            assert!((w[1] - w[0] - 0.02).abs() < 1e-12);
        }
    }

    #[test]
    fn testfunc_hand_values() {
        let grid = TimeGrid::new(vec![0.5, 0.75, 1.5]).unwrap();
        let s = eval_testfunc(&pt(&[0.5, 0.5]), &grid).unwrap();
        assert!((s.values()[0] - 0.0625).abs() < 1e-12, "{}", s.values()[0]);

        let s = eval_testfunc(&pt(&[0.0, 0.0]), &grid).unwrap();
        assert!((s.values()[2] - 0.25).abs() < 1e-12);

        let s = eval_testfunc(&pt(&[1.0, 1.0]), &grid).unwrap();
        let expected = -1.0 / 2.25 + 0.25_f64.powi(6);
        assert!((s.values()[1] - expected).abs() < 1e-12);
        assert!((s.values()[1] - (-0.444200)).abs() < 1e-6);
    }

    #[test]
    fn testfunc_is_deterministic() {
        let grid = default_grid();
        let x = pt(&[0.3, 0.7]);
        let a = eval_testfunc(&x, &grid).unwrap();
        let b = eval_testfunc(&x, &grid).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn testfunc_rejects_bad_inputs() {
        let grid = default_grid();
        assert!(matches!(
            eval_testfunc(&pt(&[0.5]), &grid),
            Err(SimError::DimensionMismatch { .. })
        ));
        // a zero time stamp cannot even enter through TimeGrid + positivity check
        let zgrid = TimeGrid::new(vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            eval_testfunc(&pt(&[0.5, 0.5]), &zgrid),
            Err(SimError::NonPositiveTime { index: 0, .. })
        ));
    }

    #[test]
    fn target_is_self_consistent() {
        let sim = SimulatorSpec::builtin();
        let x0 = pt(&[0.5, 0.5]);
        let g0 = target_from_point(&x0, &sim).unwrap();
        assert!((g0.values()[0] - 0.0625).abs() < 1e-12);
        let again = sim.evaluate(&x0).unwrap();
        // same code path: exactly zero discrepancy
        assert_eq!(g0.values(), again.values());
    }

    #[test]
    fn grid_invariants_enforced() {
        assert!(TimeGrid::new(vec![1.0]).is_err());
        assert!(TimeGrid::new(vec![1.0, 1.0]).is_err());
        assert!(TimeGrid::new(vec![1.0, 0.5]).is_err());
        assert!(TimeGrid::new(vec![1.0, f64::NAN]).is_err());
        assert!(TimeGrid::new(vec![1.0, 2.0, 3.0]).is_ok());
    }

    #[test]
    fn point_invariants_enforced() {
        assert!(DesignPoint::new(vec![]).is_err());
        assert!(DesignPoint::new(vec![1.1]).is_err());
        assert!(DesignPoint::new(vec![-0.1]).is_err());
        assert!(DesignPoint::new(vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn descaling_hits_bounds() {
        let b = InputBounds::new(
            vec![-5.0, 100.0],
            vec![5.0, 300.0],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        assert_eq!(b.descale(&pt(&[0.0, 0.0])), vec![-5.0, 100.0]);
        assert_eq!(b.descale(&pt(&[1.0, 1.0])), vec![5.0, 300.0]);
        assert_eq!(b.descale(&pt(&[0.5, 0.5])), vec![0.0, 200.0]);
    }

    #[test]
    fn batch_matches_single_evaluations() {
        let sim = SimulatorSpec::builtin();
        let xs = vec![pt(&[0.1, 0.9]), pt(&[0.5, 0.5]), pt(&[0.9, 0.1])];
        let batch = sim.evaluate_batch(&xs).unwrap();
        for (x, series) in xs.iter().zip(&batch) {
            assert_eq!(series.values(), sim.evaluate(x).unwrap().values());
        }
    }
}
