use thiserror::Error;

/// Errors raised by allocation rules, solvers and the trial engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("arm index {arm} out of range for {arms} arms")]
    ArmOutOfRange { arm: usize, arms: usize },

    #[error("stratum ({t}, {w}) out of range for a {rows}x{cols} table")]
    StratumOutOfRange { t: usize, w: usize, rows: usize, cols: usize },

    #[error("allocation proportion is undefined before the first assignment")]
    UndefinedProportion,

    #[error("operation requires {expected} arms, state has {found}")]
    UnsupportedArity { expected: usize, found: usize },

    #[error("rule reads the allocation proportion and needs at least one assignment")]
    NeedsHistory,

    #[error("invalid rule: {0}")]
    InvalidRule(String),

    #[error("evaluator returned {value} at x = {x}, outside [0, 1]")]
    Domain { x: f64, value: f64 },

    #[error("map is not nonincreasing: f({x0}) = {f0} < f({x1}) = {f1}")]
    NotMonotone { x0: f64, f0: f64, x1: f64, f1: f64 },

    #[error("downcrossing at {t} lies on the boundary of [0, 1]")]
    BoundaryDowncrossing { t: f64 },

    #[error("tolerance {0} is below the solver floor or not finite")]
    InvalidTolerance(f64),

    #[error("vectorial iteration did not converge (residual {residual:e}, last iterate {last:?})")]
    NoConvergence { last: Vec<f64>, residual: f64 },

    #[error("invalid witness: {0}")]
    InvalidWitness(String),

    #[error("model input: {0}")]
    ModelInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("design matrix is rank deficient")]
    SingularDesign,

    #[error("target value {0} is outside (0, 1)")]
    TargetRange(f64),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("replication {index} failed: {source}")]
    Replication {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("trajectory has no martingale path recorded")]
    MissingDiagnostic,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
