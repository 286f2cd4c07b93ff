use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice box: {0}")]
    InvalidBox(String),

    #[error("clock rate must be positive and finite, got {0}")]
    InvalidRate(f64),

    #[error("expected {expected:.0} events exceeds the event budget of {budget}")]
    EventBudgetExceeded { expected: f64, budget: u64 },

    #[error("site {site:?} lies outside the box of radius {radius}")]
    OutOfBox { site: Vec<i32>, radius: i32 },

    #[error("time {time} outside the open interval (0, {horizon})")]
    OutOfHorizon { time: f64, horizon: f64 },

    #[error("an event already occurs at time {0}")]
    DuplicateTime(f64),

    #[error("no event at ({time}, {site:?})")]
    MissingEvent { time: f64, site: Vec<i32> },

    #[error("initial condition violates the {bound}-Lipschitz constraint between {a:?} (height {ha}) and {b:?} (height {hb})")]
    Inadmissible {
        a: Vec<i32>,
        b: Vec<i32>,
        ha: i64,
        hb: i64,
        bound: i64,
    },

    #[error("initial condition has {got} heights, box has {expected} sites")]
    InitShape { expected: usize, got: usize },

    #[error("accepted update not present in the log")]
    NotInLog,

    #[error("refusing to enumerate: {count} events exceed the cap of {cap}")]
    EnumerationCap { count: usize, cap: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid pyramid: {0}")]
    InvalidPyramid(String),

    #[error("sample of size {n} is below the minimum of {min}")]
    SampleTooSmall { n: usize, min: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("refusing to emit an empty report `{0}`")]
    EmptyReport(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
