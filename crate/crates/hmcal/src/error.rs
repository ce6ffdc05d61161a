//! Error types shared across the engine.

use thiserror::Error;

/// Invariant violations when constructing domain values.
#[derive(Debug, Clone, Error)]
pub enum DomainError {
    #[error("time grid needs at least 2 points, got {0}")]
    GridTooShort(usize),
    #[error("time grid must be strictly increasing and finite (violated at index {0})")]
    GridNotIncreasing(usize),
    #[error("series length {got} does not match grid length {expected}")]
    SeriesLengthMismatch { expected: usize, got: usize },
    #[error("series value at index {0} is not finite")]
    SeriesNotFinite(usize),
    #[error("point needs at least one coordinate")]
    EmptyPoint,
    #[error("coordinate {index} = {value} lies outside [0, 1]")]
    CoordOutOfRange { index: usize, value: f64 },
    #[error("bounds need lower < upper (violated at index {0})")]
    BadBounds(usize),
    #[error("bounds dimension {got} does not match d = {expected}")]
    BoundsDimensionMismatch { expected: usize, got: usize },
}

/// Simulator evaluation failures. The offending input is carried along so a
/// failed batch can be diagnosed.
#[derive(Debug, Clone, Error)]
pub enum SimError {
    #[error("input has {got} coordinates, simulator expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("builtin test function needs strictly positive times (t_{index} = {value})")]
    NonPositiveTime { index: usize, value: f64 },
    #[error("simulator process failed for x = {x:?}: {message}")]
    ProcessFailure { x: Vec<f64>, message: String },
    #[error("malformed simulator output for x = {x:?}: {message}")]
    MalformedOutput { x: Vec<f64>, message: String },
    #[error("simulator timed out after {seconds} s for x = {x:?}")]
    Timeout { x: Vec<f64>, seconds: u64 },
    #[error("i/o error talking to simulator for x = {x:?}: {message}")]
    Io { x: Vec<f64>, message: String },
    #[error("{0}")]
    Domain(#[from] DomainError),
}

/// Surrogate fitting failures.
#[derive(Debug, Clone, Error)]
pub enum FitError {
    #[error("need at least 2 training points, got {0}")]
    TooFewPoints(usize),
    #[error("training inputs and outputs differ in length ({x} vs {y})")]
    LengthMismatch { x: usize, y: usize },
    #[error("training output at index {0} is not finite")]
    NonFiniteOutput(usize),
    #[error("training input dimensions are inconsistent")]
    DimensionMismatch,
    #[error("correlation matrix stayed singular up to nugget {nugget:e}")]
    Singular { nugget: f64 },
}

/// Configuration problems detected before a run starts.
#[derive(Debug, Clone, Error)]
pub enum ConfigError {
    #[error("n1 must be at least 2, got {0}")]
    InitialDesignTooSmall(usize),
    #[error("cutoff c must be positive, got {0}")]
    NonPositiveCutoff(f64),
    #[error("tk must satisfy 1 <= tk <= L = {l}, got {tk}")]
    BadTk { tk: usize, l: usize },
    #[error("test set size M must be at least 1")]
    EmptyTestSet,
    #[error("dps index {index} out of range [1, {l}] (indices are 1-based)")]
    DpsOutOfRange { index: usize, l: usize },
    #[error("dps contains duplicate index {0}")]
    DpsDuplicate(usize),
    #[error("dps length {got} does not match tk = {tk}")]
    DpsLengthMismatch { tk: usize, got: usize },
    #[error("cannot place {tk} distinct equally spaced indices in [1, {l}]")]
    DpsUnplaceable { tk: usize, l: usize },
    #[error("max_iterations must be at least 1")]
    NoIterations,
    #[error("target series is not on the simulator grid")]
    TargetGridMismatch,
    #[error("{0}")]
    Domain(#[from] DomainError),
}

/// Metric evaluation failures; reported per-field in a fit report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("series are on different grids")]
    GridMismatch,
    #[error("metric undefined: candidate series is constant")]
    ConstantCandidate,
    #[error("metric undefined: target series is constant")]
    ConstantTarget,
    #[error("metric undefined: no ratio survives the denominator guard")]
    NoValidRatios,
    #[error("metric undefined: percentile band is empty")]
    EmptyBand,
    #[error("percentile bounds need 0 <= l < u <= 100")]
    BadPercentiles,
}

/// Top-level failure of a history-matching run.
#[derive(Debug, Error)]
pub enum HmError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("simulator failed before any point was evaluated: {0}")]
    NothingEvaluated(#[source] SimError),
}
