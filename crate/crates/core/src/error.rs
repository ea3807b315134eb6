use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed surface tension model: {0}")]
    MalformedModel(String),

    #[error("points {0} and {1} of the anchor triangle coincide")]
    CoincidentPoints(usize, usize),

    #[error("anchor triangle has an angle of at least 2π/3 at vertex {0}")]
    WideAngle(usize),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("junction reached anchor {anchor}: boundary length {length:e} below floor")]
    AnchorCollision { anchor: usize, length: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("junction displacement {displacement} violates |a0 - a_inf| < |b_inf|/2 = {limit}")]
    DisplacementTooLarge { displacement: f64, limit: f64 },

    #[error("no decay to fit: {0}")]
    NoDecayWindow(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("unresolvable topology: {0}")]
    Topology(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
