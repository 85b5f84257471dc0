use thiserror::Error;

/// Errors raised across model validation, spectral analysis and simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("model needs at least 2 states, got {0}")]
    TooFewStates(usize),

    #[error("field `{field}` has length {got}, expected {expected}")]
    Shape {
        field: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in `{0}`")]
    NonFinite(&'static str),

    #[error("jump intensity lambda({state}) = {value} must be strictly positive")]
    ZeroIntensity { state: usize, value: f64 },

    #[error("negative volatility sigma({state}) = {value}")]
    NegativeVolatility { state: usize, value: f64 },

    #[error("jump kernel has q({state},{state}) = {value}, self-jumps are not allowed")]
    NonzeroDiagonalKernel { state: usize, value: f64 },

    #[error("jump kernel row {row} is invalid (sum {sum}, entries must be nonnegative and sum to 1)")]
    RowSumViolation { row: usize, sum: f64 },

    #[error("jump kernel is reducible: state {to} is not reachable from state {from}")]
    ReducibleKernel { from: usize, to: usize },

    #[error("all volatilities are zero; the noise term is degenerate")]
    AllVolatilitiesZero,

    #[error("linear system for the invariant law is singular")]
    SingularSystem,

    #[error("ergodicity condition fails: alpha = sum a(i) mu(i) = {alpha} must be < 0")]
    ErgodicityViolated { alpha: f64 },

    #[error("model is in the light-tail regime (all a(i) <= 0); a heavy-tail model is required")]
    LightRegime,

    #[error("interval [{s}, {t}] lies outside the path [{start}, {end}]")]
    IntervalOutsidePath { s: f64, t: f64, start: f64, end: f64 },

    #[error("matrix has a negative entry {value} at ({row},{col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("eigenvalue iteration did not converge after {0} iterations")]
    NonConvergence(usize),

    #[error("could not bracket the root: {0}")]
    BracketingFailure(String),

    #[error("kappa methods disagree: M_s root {ms}, generator root {gs}")]
    MethodDisagreement { ms: f64, gs: f64 },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
